#!/usr/bin/env python3
"""Timing study for the tridiagonal fast path.

Solve time should scale roughly quadratically in n (linear pivots,
linear work per pivot); the doubling ratio t(2n)/t(n) stays near 4.

Example:
    python scripts/tridiagonal_scaling.py --n-list 1000,2000,4000 --reps 3
"""

import argparse
import sys
import time

from pppa import GenSpec, gen_tridiagonal, solve_sbar


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n-list", default="1000,2000,4000")
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    sizes = [int(t) for t in args.n_list.split(",") if t]
    solve_sbar(gen_tridiagonal(GenSpec(family="tridiagonal", n=200, seed=0)),
               check=False)  # warm-up
    best = {}
    for n in sizes:
        times = []
        pivots = flops = 0
        for rep in range(args.reps):
            inst = gen_tridiagonal(GenSpec(family="tridiagonal", n=n,
                                           seed=args.seed + rep + 1))
            t0 = time.perf_counter()
            out = solve_sbar(inst, check=False)
            times.append(time.perf_counter() - t0)
            pivots = out.stats.pivots
            flops = out.stats.max_iter_flops
        best[n] = min(times)
        print(f"n={n:6d}  best={best[n]*1e3:9.2f} ms  pivots={pivots}  "
              f"max per-iteration flops/n={flops / n:.1f}")
    for small, large in zip(sizes, sizes[1:]):
        if large == 2 * small:
            print(f"t({large})/t({small}) = {best[large] / best[small]:.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
