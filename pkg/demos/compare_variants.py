"""Run every scheduling variant on one Ising grid and tabulate the work.

Priority-driven variants should land well under the synchronous update
count; bucket sits in between. Sizes are desk-scale so the whole table
prints in seconds.
"""
import argparse
import time

from relaxbp import engine, models


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=60)
    ap.add_argument("--cols", type=int, default=60)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--threshold", type=float, default=1e-5)
    args = ap.parse_args()

    g = models.gen_ising(args.rows, args.cols, seed=args.seed)
    print(f"ising {args.rows}x{args.cols}: {g.node_count} nodes, "
          f"{g.edge_count} edges, tau={args.threshold:g}\n")
    print(f"{'variant':<14} {'updates':>10} {'vs residual':>12} "
          f"{'seconds':>8}  converged")
    base = None
    for variant in engine.VARIANTS:
        t0 = time.time()
        rep = engine.run(g, variant=variant, threshold=args.threshold,
                         splash_h=2, time_cap=120.0)
        took = time.time() - t0
        if variant == "residual":
            base = rep.total_updates
        rel = f"{rep.total_updates / base:.2f}x" if base else "--"
        print(f"{variant:<14} {rep.total_updates:>10} {rel:>12} "
              f"{took:>8.2f}  {rep.converged}")


if __name__ == "__main__":
    main()
