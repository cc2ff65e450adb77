"""Decode a noisy codeword with the parallel relaxed engine.

Builds a (3,6)-biregular parity-check graph, flips channel bits at rate
eps, runs belief propagation to the decode threshold, and counts the bit
errors before and after.
"""
import argparse

import numpy as np

from relaxbp import engine, models


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--constraints", type=int, default=2000)
    ap.add_argument("--eps", type=float, default=0.07)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=8)
    args = ap.parse_args()

    g, truth = models.gen_ldpc(args.constraints, eps=args.eps,
                               seed=args.seed)
    nbits = len(truth.transmitted)
    flipped = int(truth.received.sum())
    print(f"{nbits} bits over a BSC(eps={args.eps:g}): "
          f"{flipped} flipped on the channel")

    rep = engine.run(g, variant="residual", scheduler="mq",
                     workers=args.workers, threshold=1e-2, seed=args.seed,
                     snapshot=True)
    bits = np.array([int(np.argmax(rep.marginal(i))) for i in range(nbits)])
    errors = int((bits != truth.transmitted).sum())
    print(f"after {rep.total_updates} message updates "
          f"({rep.wall_time:.1f}s, converged={rep.converged}): "
          f"{errors} bit errors remain")
    print("decode", "SUCCEEDED" if errors == 0 else "FAILED")


if __name__ == "__main__":
    main()
