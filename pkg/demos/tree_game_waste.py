"""How much can a q-relaxed scheduler waste on a single-source tree?

Two instances bracket the answer. On a wide uniform tree the frontier of
live work quickly outgrows q and the adversary is forced into useful
updates: waste stays O(H q^2), invisible next to n. On a narrow layered
instance the frontier is pinned at four live messages, so a worst-case
adversary keeps q-1 wasted pops in front of every useful one and total
work grows linearly with q.
"""
import argparse

from relaxbp import treegame


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=10000)
    ap.add_argument("--trace-csv", default=None,
                    help="dump the last game's per-step trace here")
    args = ap.parse_args()

    wide = treegame.build_uniform_tree("full-binary", args.nodes)
    print(f"wide tree: n={wide.n}, height={wide.height}")
    print(f"{'q':>4} {'total':>9} {'wasted':>8} {'bound n-1+Hq^2':>15}")
    for q in (4, 16, 64):
        tr = treegame.run_tree_game(wide, q=q, adversary="worst_legal")
        bound = (wide.n - 1) + wide.height * q * q
        print(f"{q:>4} {tr.total:>9} {tr.wasted:>8} {bound:>15}")

    narrow = treegame.build_bad_instance(args.nodes)
    print(f"\nnarrow instance: n={narrow.n}, height={narrow.height}")
    print(f"{'q':>4} {'total':>9} {'wasted':>8} {'per-edge':>9} "
          f"{'max frontier':>13}")
    tr = None
    for q in (8, 16, 32, 64):
        tr = treegame.run_tree_game(narrow, q=q,
                                    adversary="frontier_starving")
        print(f"{q:>4} {tr.total:>9} {tr.wasted:>8} "
              f"{tr.total / (narrow.n - 1):>9.2f} {tr.max_frontier:>13}")
    if args.trace_csv and tr is not None:
        tr.dump_csv(args.trace_csv)
        print(f"\nwrote per-step trace to {args.trace_csv}")


if __name__ == "__main__":
    main()
