"""Command-line front end.

Subcommands: map, gen-problem, plan, refine, simulate, assess, select,
pipeline, scaling, plot.  Exit codes: 0 success, 1 internal error, 2 input
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import assess, planner, reporting, simulator
from .pipeline import (PipelineConfig, StageError, map_from_sonar,
                       read_trajectory_csv, run_pipeline, stage_rng,
                       steps_from_trace)
from .refiner import refine
from .scenario import (format_scenario, ground_to_mdp, load_scenario,
                       read_plan_file, write_plan_file, PlanFile)
from .occupancy import extract_problem

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2


def _fail(message: str, code: int) -> int:
    print(json.dumps({"error": message, "exit_code": code}), file=sys.stderr)
    return code


def _load_scenario_or_fail(path):
    parsed = load_scenario(path)
    if not parsed.ok:
        for e in parsed.errors:
            print(str(e), file=sys.stderr)
        return None
    return parsed.scenario


def cmd_map(args) -> int:
    scenario = _load_scenario_or_fail(args.scenario)
    if scenario is None:
        return EXIT_INPUT
    grid = map_from_sonar(scenario, args.seed, args.noise_sigma)
    grid.export_csv(args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_gen_problem(args) -> int:
    scenario = _load_scenario_or_fail(args.scenario)
    if scenario is None:
        return EXIT_INPUT
    grid = map_from_sonar(scenario, args.seed, args.noise_sigma)
    updated = extract_problem(grid, scenario, kappa=args.kappa)
    Path(args.out).write_text(format_scenario(updated), encoding="utf-8")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_plan(args) -> int:
    scenario = _load_scenario_or_fail(args.scenario)
    if scenario is None:
        return EXIT_INPUT
    mdp = ground_to_mdp(scenario)
    candidates = planner.generate_candidates(
        mdp, args.samples, (args.gamma_low, args.gamma_high),
        rng=stage_rng(args.seed, "plan"),
        failure_cost=args.collision_cost)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for cand in candidates:
        write_plan_file(PlanFile(
            plan_id=cand.plan.id,
            gamma=cand.first_gamma,
            actions=cand.plan.linearization,
            high_level_length=len(cand.plan.linearization),
            planning_time_s=round(cand.planning_time_s, 1),
        ), out / f"plan_{cand.plan.id}.json")
        print(f"{cand.plan.id}: gamma={cand.first_gamma:.3f} "
              f"steps={len(cand.plan.linearization)}")
    return EXIT_OK


def _steps_from_labels(actions: list[str]) -> list[tuple[str, str]]:
    steps = []
    for label in actions:
        kind, _, name = label.partition(" ")
        if kind == "goto":
            steps.append(("goto", name))
        elif kind == "inspect":
            steps.append(("inspect", name))
        else:
            raise ValueError(f"unrecognized plan action {label!r}")
    return steps


def cmd_refine(args) -> int:
    scenario = _load_scenario_or_fail(args.scenario)
    if scenario is None:
        return EXIT_INPUT
    plan = read_plan_file(args.plan)
    traj = refine(scenario, _steps_from_labels(plan.actions), plan_id=plan.plan_id)
    traj.export_csv(args.out)
    print(f"wrote {args.out}: {traj.total_length:.2f} m, "
          f"{traj.nominal_duration:.1f} s nominal")
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = _load_scenario_or_fail(args.scenario)
    if scenario is None:
        return EXIT_INPUT
    traj = read_trajectory_csv(args.trajectory, plan_id=args.plan_id)
    cfg = simulator.DisturbanceConfig(
        current_sigma=args.current_sigma,
        obstacle_sigma=args.obstacle_sigma,
        recovery_penalty_s=args.recovery_penalty,
        perturb_target=args.perturb_target,
        perturb_all=args.perturb_all,
    )
    records = simulator.run_batch(traj, scenario, cfg, n=args.episodes,
                                  master_seed=args.seed, plan_id=args.plan_id)
    simulator.write_episode_log(records, args.out)
    done = sum(1 for r in records if r.completed)
    print(f"wrote {args.out}: {done}/{len(records)} episodes completed")
    return EXIT_OK


def cmd_assess(args) -> int:
    samples = {}
    for path in args.episodes:
        for r in simulator.read_episode_log(path):
            samples.setdefault(r.plan_id, []).append(r.execution_time_s)
    cfg = assess.MetricConfig(bin_width=args.bin_width, alpha=args.alpha,
                              time_bound=args.time_bound)
    report = assess.build_report(samples, cfg, alpha_mean=args.alpha_mean)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {args.out}: selected {report['selection']['selected']}")
    return EXIT_OK


def cmd_select(args) -> int:
    with open(args.report, encoding="utf-8") as fh:
        report = json.load(fh)
    print(report["selection"]["selected"])
    return EXIT_OK


def cmd_pipeline(args) -> int:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
        doc.setdefault("scenario_path", args.scenario)
        doc.setdefault("out_dir", args.out_dir)
        if args.seed is not None:
            doc["master_seed"] = args.seed
        cfg = PipelineConfig.from_doc(doc)
    else:
        if args.seed is None:
            return _fail("--seed is required", EXIT_INPUT)
        cfg = PipelineConfig(
            scenario_path=args.scenario,
            out_dir=args.out_dir,
            master_seed=args.seed,
            gamma_samples=args.samples,
            gamma_low=args.gamma_low,
            gamma_high=args.gamma_high,
            episodes=args.episodes,
            collision_cost=args.collision_cost,
            from_sonar=args.from_sonar,
            disturbance=simulator.DisturbanceConfig(
                perturb_target=None if args.perturb_target == "none"
                else args.perturb_target),
        )
    result = run_pipeline(cfg)
    print(f"candidates: {len(result.candidates)}; selected: {result.selected}")
    print(f"artifacts in {cfg.out_dir}")
    return EXIT_OK


def cmd_scaling(args) -> int:
    depths = [int(x) for x in args.depths.split(",") if x]
    crits = [int(x) for x in args.criticals.split(",") if x]
    if not depths or len(depths) != len(crits):
        return _fail("depth and critical lists must be nonempty and equal length",
                     EXIT_INPUT)
    rows = reporting.run_scaling(depths, crits, args.seed,
                                 collision_cost=args.collision_cost)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["depth", "criticals", "solvable", "plan_length",
                         "gamma", "planning_time_s", "median_solve_time_s", "error"])
        for r in rows:
            writer.writerow([
                r.depth, r.criticals, r.solvable,
                r.plan_length if r.plan_length is not None else "",
                f"{r.gamma:.3f}" if r.gamma is not None else "",
                f"{r.planning_time_s:.4f}" if r.planning_time_s is not None else "",
                f"{r.median_solve_time_s:.4f}" if r.median_solve_time_s is not None else "",
                r.error or "",
            ])
    solvable = sum(1 for r in rows if r.solvable)
    print(f"wrote {args.out}: {solvable}/{len(rows)} scenarios solvable")
    return EXIT_OK if solvable else EXIT_INTERNAL


def cmd_plot(args) -> int:
    with open(args.report, encoding="utf-8") as fh:
        report = json.load(fh)
    samples = report.get("samples", {})
    svg, rows = reporting.boxplot_svg(samples)
    Path(args.out_svg).write_text(svg, encoding="utf-8")
    with open(args.out_csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["plan_id", "kind", "episode", "value"])
        writer.writerows(rows)
    print(f"wrote {args.out_svg} and {args.out_csv}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskplan",
        description="Risk-averse mission planning: candidate generation, "
                    "simulation-based assessment, and plan selection.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("map", help="build an occupancy grid from synthetic sonar")
    p.add_argument("scenario")
    p.add_argument("--out", default="grid.csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-sigma", type=float, default=0.05)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("gen-problem",
                       help="re-derive critical flags and edge risks from the map")
    p.add_argument("scenario")
    p.add_argument("--out", default="problem.scn")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-sigma", type=float, default=0.05)
    p.add_argument("--kappa", type=float, default=0.3)
    p.set_defaults(func=cmd_gen_problem)

    p = sub.add_parser("plan", help="generate deduplicated candidate plans")
    p.add_argument("scenario")
    p.add_argument("--out-dir", default="plans")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--gamma-low", type=float, default=0.4)
    p.add_argument("--gamma-high", type=float, default=1.0)
    p.add_argument("--collision-cost", type=float, default=12.0)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("refine", help="refine a plan file into a trajectory CSV")
    p.add_argument("scenario")
    p.add_argument("plan")
    p.add_argument("--out", default="trajectory.csv")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("simulate", help="run seeded episodes of a trajectory")
    p.add_argument("scenario")
    p.add_argument("trajectory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--plan-id", default="P1")
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--current-sigma", type=float, default=0.05)
    p.add_argument("--obstacle-sigma", type=float, default=0.3)
    p.add_argument("--recovery-penalty", type=float, default=20.0)
    p.add_argument("--perturb-target", default=None)
    p.add_argument("--perturb-all", action="store_true")
    p.add_argument("--out", default="episodes.jsonl")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("assess", help="compute risk metrics from episode logs")
    p.add_argument("episodes", nargs="+")
    p.add_argument("--out", default="report.json")
    p.add_argument("--bin-width", type=float, default=assess.DEFAULT_BIN_WIDTH)
    p.add_argument("--alpha", type=float, default=assess.DEFAULT_ALPHA)
    p.add_argument("--time-bound", type=float, default=assess.DEFAULT_TIME_BOUND)
    p.add_argument("--alpha-mean", type=float, default=assess.DEFAULT_ALPHA_MEAN)
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("select", help="print the selected plan of a report")
    p.add_argument("report")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("pipeline", help="run the full flow end to end")
    p.add_argument("scenario")
    p.add_argument("--out-dir", default="out")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None, help="JSON PipelineConfig")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--gamma-low", type=float, default=0.4)
    p.add_argument("--gamma-high", type=float, default=1.0)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--collision-cost", type=float, default=12.0)
    p.add_argument("--from-sonar", action="store_true")
    p.add_argument("--perturb-target", default="sm_tank",
                   help="obstacle label displaced per episode; 'none' disables")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("scaling", help="corridor scaling study")
    p.add_argument("--depths", default="3,4,5,6,30,90",
                   help="comma list of corridor depths")
    p.add_argument("--criticals", default="3,4,5,6,10,35",
                   help="comma list, same length as --depths")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--collision-cost", type=float, default=None,
                   help="finite dead-end cost; default treats crashes as unrecoverable")
    p.add_argument("--out", default="scaling.csv")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("plot", help="box-plot SVG from an assessment report")
    p.add_argument("report")
    p.add_argument("--out-svg", default="boxplot.svg")
    p.add_argument("--out-csv", default="samples.csv")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(json.dumps(exc.to_doc()), file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    except Exception as exc:  # pragma: no cover - defensive
        return _fail(f"{type(exc).__name__}: {exc}", EXIT_INTERNAL)


if __name__ == "__main__":
    sys.exit(main())
