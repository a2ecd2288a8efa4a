#!/usr/bin/env python3
"""Corridor scaling study: solve the full (depth, criticals) suite and print
the table that `riskplan scaling` writes to CSV."""

import argparse
import sys

from riskplan.reporting import run_scaling

DEPTHS = [3, 4, 5, 6, 30, 90]
CRITICALS = [3, 4, 5, 6, 10, 35]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=11)
    args = parser.parse_args()

    rows = run_scaling(DEPTHS, CRITICALS, master_seed=args.seed)
    print(f"{'depth':>6} {'crit':>5} {'solvable':>8} {'length':>7} "
          f"{'gamma':>6} {'median solve [s]':>17}")
    for r in rows:
        if r.solvable:
            print(f"{r.depth:>6} {r.criticals:>5} {'yes':>8} "
                  f"{r.plan_length:>7} {r.gamma:>6.3f} "
                  f"{r.median_solve_time_s:>17.4f}")
        else:
            print(f"{r.depth:>6} {r.criticals:>5} {'NO':>8}  {r.error}")
    return 0 if all(r.solvable for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
