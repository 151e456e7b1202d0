#!/usr/bin/env python3
"""Seed sweep of the T-iteration on P^1: iterations to tolerance, final
residual and the distance of the normalized limit from the closed-form
balanced Gram, printed as a table.

    python3 scripts/run_balance_sweep.py --k 4 --seeds 20
"""

import argparse

import numpy as np

from ckequant import solver
from ckequant.config import TestbedSpec
from ckequant.geometry import build_grid


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--perturb", type=float, default=2.0)
    ap.add_argument("--tol", type=float, default=1e-20)
    args = ap.parse_args()

    spec = TestbedSpec(n=1, degrees=(1, 1), k=args.k)
    grid = build_grid(spec, 64)
    ref = solver.reference_state(spec, grid)
    print(f"{'seed':>4} {'iters':>6} {'residual':>12} {'limit_err':>12}")
    for seed in range(args.seeds):
        rng = np.random.default_rng(seed)
        start = solver.perturbed_start(ref, rng, args.perturb)
        final, trace = solver.iterate_to_balance(start, 500, args.tol)
        norm = solver.normalize(solver.normalize(final, "torus_recenter"),
                                "scale_fix")
        err = max(np.max(np.abs(g.diag - r.diag) / r.diag)
                  for g, r in zip(norm.grams, norm.refs))
        print(f"{seed:>4} {len(trace.rows) - 1:>6} {final.residual:>12.3e} "
              f"{err:>12.3e}")


if __name__ == "__main__":
    main()
