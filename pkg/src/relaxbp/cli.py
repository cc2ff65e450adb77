"""Benchmark harness: generate models, run engines, verify, sweep.

Four subcommands. `generate` writes a model as MRF-TXT v1 (plus the
ground-truth sidecar `<model>.truth` for code instances). `run` executes
one (variant, scheduler, workers) configuration on a model file,
repeating `--reps` times; it prints one JSON report to stdout and can
append one CSV row per repetition to a results file. `verify` replays a
saved marginals file against whichever oracle applies: the sidecar
decode check, exact enumeration when the joint fits the guard, or the
two-pass tree solver on acyclic models. `sweep` drives a JSON manifest
of configurations into the same CSV format.

Exit codes: 0 for any recorded result (non-convergence included), 1 for
usage or configuration errors, 2 for IO and parse errors.
"""
import argparse
import json
import os
import sys
import time

import numpy as np

from . import engine, models, mrf
from .errors import FormatError, GraphConstructionFailed, TooLarge

__all__ = ["main", "CSV_COLUMNS"]

CSV_COLUMNS = ["model", "variant", "scheduler", "workers", "H", "seed",
               "rep", "time_s", "updates", "converged", "decode_success"]

GRID_KINDS = ("ising", "potts")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the harness reserves 2 for IO
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(f"error: {message}")


def _build_parser():
    top = _Parser(prog="relaxbp", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a model file",
                         parents=[], add_help=True)
    gen.add_argument("kind", choices=("tree",) + GRID_KINDS + ("ldpc",))
    gen.add_argument("size", type=int, nargs="+",
                     help="tree/ldpc: one count; grids: rows cols")
    gen.add_argument("--eps", type=float, default=0.07,
                     help="channel flip probability (ldpc)")
    gen.add_argument("--seed", type=int, default=1)
    gen.add_argument("--out", required=True, help="model file to write")

    run = sub.add_parser("run", help="run one configuration on a model file")
    run.add_argument("model", help="MRF-TXT v1 file")
    run.add_argument("--variant", default="residual",
                     choices=engine.VARIANTS)
    run.add_argument("--scheduler", default="exact",
                     choices=engine.SCHEDULERS)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--mq-queues-per-worker", type=int, default=4)
    run.add_argument("--splash-h", type=int, default=2)
    run.add_argument("--threshold", type=float, default=None,
                     help="default 1e-5, or 1e-2 when a decode sidecar "
                          "is present")
    run.add_argument("--check-interval", type=int, default=1000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--time-cap", type=float, default=300.0)
    run.add_argument("--reps", type=int, default=1)
    run.add_argument("--sim-q", type=int, default=1)
    run.add_argument("--adversary", default="worst_legal")
    run.add_argument("--out", default=None,
                     help="CSV file to append one row per repetition")
    run.add_argument("--marginals-out", default=None,
                     help="save the last repetition's marginals here")

    ver = sub.add_parser("verify", help="check saved marginals on a model")
    ver.add_argument("model")
    ver.add_argument("marginals")
    ver.add_argument("--tolerance", type=float, default=1e-8)

    sw = sub.add_parser("sweep", help="run a manifest of configurations")
    sw.add_argument("manifest", help="JSON list of cells")
    sw.add_argument("--out", default="results.csv")
    return top


def _spec_from_args(args):
    if args.kind in GRID_KINDS and len(args.size) != 2:
        raise ValueError(f"{args.kind} takes rows cols")
    if args.kind not in GRID_KINDS and len(args.size) != 1:
        raise ValueError(f"{args.kind} takes one size")
    return models.ModelSpec(args.kind, tuple(args.size), seed=args.seed,
                            eps=args.eps)


def cli_generate(args):
    graph, truth = models.generate(_spec_from_args(args))
    mrf.save_mrf_txt(graph, args.out)
    if truth is not None:
        models.save_ldpc_truth(truth, args.out + ".truth")
    print(f"wrote {args.out}: {graph.node_count} nodes, "
          f"{graph.edge_count} edges"
          + (f", sidecar {args.out}.truth" if truth is not None else ""))
    return 0


def _decode_bits(report, nbits):
    return np.array([int(np.argmax(report.marginal(i)))
                     for i in range(nbits)], dtype=np.int64)


def _append_rows(path, rows):
    header = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8") as fh:
        if header:
            fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join("" if row[c] is None else str(row[c])
                              for c in CSV_COLUMNS) + "\n")


def _baseline_updates(path, model, seed):
    """Mean updates of recorded exact-residual single-worker rows, or None."""
    if not path or not os.path.exists(path):
        return None
    picked = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        try:
            col = {name: header.index(name) for name in
                   ("model", "variant", "scheduler", "workers", "seed",
                    "updates")}
        except ValueError:
            return None
        for line in fh:
            f = line.rstrip("\n").split(",")
            if len(f) < len(header):
                continue
            if (f[col["model"]] == model and f[col["variant"]] == "residual"
                    and f[col["scheduler"]] == "exact"
                    and f[col["workers"]] == "1"
                    and f[col["seed"]] == str(seed)):
                picked.append(float(f[col["updates"]]))
    return float(np.mean(picked)) if picked else None


def _run_cell(graph, truth, name, cfg, reps, out_csv):
    """Run one configuration `reps` times; returns (summary, rows)."""
    rows = []
    per_rep = []
    last = None
    for rep in range(reps):
        report = engine.run(graph, **cfg)
        last = report
        decode = None
        if truth is not None:
            nbits = len(truth.transmitted)
            decode = bool(report.has_marginals and
                          (_decode_bits(report, nbits)
                           == truth.transmitted).all())
        per_rep.append({"rep": rep, "time_s": report.wall_time,
                        "updates": report.total_updates,
                        "converged": report.converged,
                        "decode_success": decode})
        rows.append({"model": name, "variant": cfg["variant"],
                     "scheduler": cfg["scheduler"],
                     "workers": cfg["workers"], "H": cfg["splash_h"],
                     "seed": cfg["seed"], "rep": rep,
                     "time_s": f"{report.wall_time:.6f}",
                     "updates": report.total_updates,
                     "converged": report.converged,
                     "decode_success": decode})
    summary = {
        "model": name,
        **{k: cfg[k] for k in ("variant", "scheduler", "workers",
                               "threshold", "check_interval", "seed",
                               "time_cap")},
        "H": cfg["splash_h"],
        "reps": reps,
        "wall_time": float(np.mean([r["time_s"] for r in per_rep])),
        "total_updates": float(np.mean([r["updates"] for r in per_rep])),
        "converged": all(r["converged"] for r in per_rep),
        "decode_success": (None if truth is None else
                           all(bool(r["decode_success"]) for r in per_rep)),
        "per_rep": per_rep,
    }
    return summary, rows, last


def cli_run(args):
    graph = mrf.load_mrf_txt(args.model)
    truth = None
    if os.path.exists(args.model + ".truth"):
        truth = models.load_ldpc_truth(args.model + ".truth")
    threshold = args.threshold
    if threshold is None:
        threshold = 1e-2 if truth is not None else 1e-5
    cfg = dict(variant=args.variant, scheduler=args.scheduler,
               workers=args.workers,
               mq_queues_per_worker=args.mq_queues_per_worker,
               splash_h=args.splash_h, threshold=threshold,
               check_interval=args.check_interval, seed=args.seed,
               time_cap=args.time_cap, sim_q=args.sim_q,
               adversary=args.adversary, snapshot=True)
    name = os.path.basename(args.model)
    baseline = _baseline_updates(args.out, name, args.seed)
    summary, rows, last = _run_cell(graph, truth, name, cfg, args.reps,
                                    args.out)
    summary["update_ratio"] = (
        None if baseline is None or baseline == 0
        else summary["total_updates"] / baseline)
    if args.out:
        _append_rows(args.out, rows)
    if args.marginals_out and last is not None and last.has_marginals:
        mrf.save_marginals_txt(last.marginals(), args.marginals_out)
    json.dump(summary, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cli_verify(args):
    graph = mrf.load_mrf_txt(args.model)
    marginals = mrf.load_marginals_txt(args.marginals)
    if len(marginals) != graph.node_count:
        raise FormatError(f"{len(marginals)} marginals for "
                          f"{graph.node_count} nodes")
    truth_path = args.model + ".truth"
    if os.path.exists(truth_path):
        truth = models.load_ldpc_truth(truth_path)
        nbits = len(truth.transmitted)
        bits = np.array([int(np.argmax(marginals[i])) for i in range(nbits)])
        errors = int((bits != truth.transmitted).sum())
        print(f"oracle: decode sidecar; bit errors {errors}/{nbits}; "
              f"decode_success {errors == 0}")
        return 0
    try:
        exact = mrf.brute_force_marginals(graph)
        oracle = "exact enumeration"
    except TooLarge:
        try:
            exact = mrf.tree_exact_marginals(graph)
            oracle = "two-pass tree solver"
        except ValueError:
            raise TooLarge("model is neither small nor acyclic; "
                           "no oracle applies")
    dev = max(float(np.max(np.abs(np.asarray(m) - np.asarray(e))))
              for m, e in zip(marginals, exact))
    print(f"oracle: {oracle}; max deviation {dev:.3e}; "
          f"within tolerance {dev <= args.tolerance}")
    return 0


def cli_sweep(args):
    try:
        with open(args.manifest, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest: {exc}") from exc
    cells = manifest["cells"] if isinstance(manifest, dict) else manifest
    all_rows = []
    for cell in cells:
        path = cell["model"]
        graph = mrf.load_mrf_txt(path)
        truth = None
        if os.path.exists(path + ".truth"):
            truth = models.load_ldpc_truth(path + ".truth")
        name = os.path.basename(path)
        workers = cell.get("workers", 1)
        if isinstance(workers, int):
            workers = [workers]
        default_tau = 1e-2 if truth is not None else 1e-5
        for w in workers:
            cfg = dict(variant=cell.get("variant", "residual"),
                       scheduler=cell.get("scheduler", "exact"),
                       workers=w,
                       mq_queues_per_worker=cell.get(
                           "mq_queues_per_worker", 4),
                       splash_h=cell.get("splash_h", 2),
                       threshold=cell.get("threshold", default_tau),
                       check_interval=cell.get("check_interval", 1000),
                       seed=cell.get("seed", 0),
                       time_cap=cell.get("time_cap", 300.0),
                       sim_q=cell.get("sim_q", 1),
                       adversary=cell.get("adversary", "worst_legal"),
                       snapshot=True)
            reps = cell.get("reps", 5)
            try:
                _, rows, _ = _run_cell(graph, truth, name, cfg, reps, None)
            except Exception as exc:  # record the cell, keep sweeping
                print(f"cell failed ({name}, {cfg['variant']}, workers={w}):"
                      f" {exc}", file=sys.stderr)
                rows = [{"model": name, "variant": cfg["variant"],
                         "scheduler": cfg["scheduler"], "workers": w,
                         "H": cfg["splash_h"], "seed": cfg["seed"],
                         "rep": rep, "time_s": "", "updates": 0,
                         "converged": False, "decode_success": None}
                        for rep in range(reps)]
            all_rows.extend(rows)
    _append_rows(args.out, all_rows)
    print(f"wrote {len(all_rows)} rows to {args.out}")
    return 0


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 1
        return 0 if not exc.code else 1
    try:
        if args.command == "generate":
            return cli_generate(args)
        if args.command == "run":
            return cli_run(args)
        if args.command == "verify":
            return cli_verify(args)
        return cli_sweep(args)
    except (OSError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TooLarge, GraphConstructionFailed, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
