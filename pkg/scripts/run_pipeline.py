#!/usr/bin/env python3
"""Run the full planning pipeline on the bundled tank-farm scenario.

Equivalent to `riskplan pipeline scenarios/tanks.scn --out-dir out --seed 7`
but kept as a script so the default experiment is one command away.
"""

import argparse
import sys
from pathlib import Path

from riskplan.pipeline import PipelineConfig, run_pipeline

REPO_ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario",
                        default=str(REPO_ROOT / "scenarios" / "tanks.scn"))
    parser.add_argument("--out-dir", default="out")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    cfg = PipelineConfig(scenario_path=args.scenario, out_dir=args.out_dir,
                         master_seed=args.seed)
    result = run_pipeline(cfg)

    print(f"candidates: {len(result.candidates)}")
    for row in result.summary_rows:
        mark = "*" if row["id"] == result.selected else " "
        print(f" {mark} {row['id']}: mean {row['mean_s']}s "
              f"var {row['variance']} | {row['plan_schema']}")
    print(f"selected: {result.selected}; artifacts in {args.out_dir}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
