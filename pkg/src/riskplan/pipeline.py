"""End-to-end orchestration: scenario -> candidates -> trajectories ->
simulated episodes -> risk metrics -> selected plan, with all artifacts
written under one output directory.

Every artifact carries the config hash and master seed; all randomness
derives from the master seed through named streams, so a rerun with the
same config reproduces every file byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
import zlib
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

import numpy as np

from . import assess, planner, simulator
from .occupancy import BeamFan, VoxelGrid, extract_problem, integrate_scan, synthesize_scans
from .refiner import HelixSpec, Trajectory, TrajectorySample, refine
from .scenario import (ParseResult, PlanFile, Scenario, ground_to_mdp,
                       load_scenario, write_plan_file)
from .simulator import DisturbanceConfig

DEFAULT_COLLISION_COST = 12.0


class StageError(Exception):
    """Pipeline stage failure with a machine-readable payload."""

    def __init__(self, stage: str, detail, exit_code: int = 1):
        self.stage = stage
        self.detail = detail
        self.exit_code = exit_code
        super().__init__(f"{stage}: {detail}")

    def to_doc(self) -> dict:
        return {"stage": self.stage, "error": self.detail, "exit_code": self.exit_code}


@dataclass
class PipelineConfig:
    scenario_path: str
    out_dir: str
    master_seed: int
    gamma_samples: int = 20
    gamma_low: float = 0.4
    gamma_high: float = 1.0
    episodes: int = 10
    collision_cost: float | None = DEFAULT_COLLISION_COST
    from_sonar: bool = False
    sonar_noise_sigma: float = 0.05
    disturbance: DisturbanceConfig = field(default_factory=DisturbanceConfig)
    metrics: assess.MetricConfig = field(default_factory=assess.MetricConfig)
    alpha_mean: float = assess.DEFAULT_ALPHA_MEAN
    helix: HelixSpec = field(default_factory=HelixSpec)

    def __post_init__(self):
        if self.gamma_samples < 1 or self.episodes < 1:
            raise ValueError("sample and episode counts must be >= 1")
        if not (0.0 < self.gamma_low < self.gamma_high <= 1.0):
            raise ValueError("gamma interval must lie inside (0,1]")

    def to_doc(self) -> dict:
        doc = asdict(self)
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "PipelineConfig":
        doc = dict(doc)
        if "disturbance" in doc and isinstance(doc["disturbance"], dict):
            dist = dict(doc["disturbance"])
            if isinstance(dist.get("perturb_target"), str) or dist.get("perturb_target") is None:
                pass
            doc["disturbance"] = DisturbanceConfig(**dist)
        if "metrics" in doc and isinstance(doc["metrics"], dict):
            doc["metrics"] = assess.MetricConfig(**doc["metrics"])
        if "helix" in doc and isinstance(doc["helix"], dict):
            doc["helix"] = HelixSpec(**doc["helix"])
        return cls(**doc)

    def config_hash(self) -> str:
        doc = self.to_doc()
        doc.pop("out_dir", None)  # where artifacts land must not change them
        payload = json.dumps(doc, sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:16]


def stage_rng(master_seed: int, stage: str) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([master_seed, zlib.crc32(stage.encode("utf-8"))]))


def steps_from_trace(trace: list[tuple[str, str]]) -> list[tuple[str, str]]:
    """Map grounded action ids back to refiner steps."""
    steps = []
    for _, action in trace:
        if action.startswith("move:"):
            steps.append(("goto", action.split("->", 1)[1]))
        elif action.startswith("inspect:"):
            steps.append(("inspect", action.split(":", 1)[1]))
        else:
            raise ValueError(f"unrecognized grounded action {action!r}")
    return steps


def read_trajectory_csv(path, plan_id: str = "") -> Trajectory:
    samples = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            samples.append(TrajectorySample(float(row["t"]),
                                            (float(row["x"]), float(row["y"]),
                                             float(row["z"])),
                                            float(row["v"])))
    length = sum(math.dist(a.position, b.position)
                 for a, b in zip(samples, samples[1:]))
    duration = samples[-1].time if samples else 0.0
    return Trajectory(samples, length, duration, plan_id)


def map_from_sonar(scenario: Scenario, master_seed: int,
                   noise_sigma: float = 0.05) -> VoxelGrid:
    """Survey the scene with a synthetic sonar sweep and build the grid."""
    pts = [w.position for w in scenario.waypoints]
    pts += [o.center for o in scenario.obstacles]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    zs = [p[2] for p in pts]
    margin = 6.0
    res = 0.5
    origin = (min(xs) - margin, min(ys) - margin, min(zs) - margin)
    dims = (int((max(xs) - min(xs) + 2 * margin) / res),
            int((max(ys) - min(ys) + 2 * margin) / res),
            int((max(zs) - min(zs) + 2 * margin) / res))
    grid = VoxelGrid(origin, dims, res)
    rng = stage_rng(master_seed, "sonar")
    fan = BeamFan(count=64, aperture=math.radians(120), max_range=25.0)
    path = []
    z = sum(zs) / len(zs)
    # orbit each obstacle so every face gets returns
    for o in scenario.obstacles:
        r = max(o.half_extents[0], o.half_extents[1]) + 6.0
        for k in range(8):
            ang = 2 * math.pi * k / 8
            pos = (o.center[0] + r * math.cos(ang),
                   o.center[1] + r * math.sin(ang), z)
            path.append((pos, ang + math.pi))  # face the obstacle
    scans = synthesize_scans(scenario.obstacles, path, fan, rng, noise_sigma)
    for scan in scans:
        integrate_scan(grid, scan)
    return grid


def _stamp(doc: dict, cfg: PipelineConfig) -> dict:
    return {"config_sha256": cfg.config_hash(), "master_seed": cfg.master_seed, **doc}


def _write_json(path: Path, doc: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass
class PipelineResult:
    candidates: list[planner.Candidate]
    trajectories: dict[str, Trajectory]
    episode_records: dict[str, list[simulator.EpisodeRecord]]
    report: dict
    summary_rows: list[dict]
    selected: str


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    parsed: ParseResult = load_scenario(cfg.scenario_path)
    if not parsed.ok:
        doc = _stamp({"stage": "parse",
                      "errors": [str(e) for e in parsed.errors]}, cfg)
        _write_json(out / "errors.json", doc)
        raise StageError("parse", [str(e) for e in parsed.errors], exit_code=2)
    scenario = parsed.scenario

    if cfg.from_sonar:
        grid = map_from_sonar(scenario, cfg.master_seed, cfg.sonar_noise_sigma)
        grid.export_csv(out / "grid.csv")
        scenario = extract_problem(grid, scenario)

    mdp = ground_to_mdp(scenario)

    t0 = time.perf_counter()
    candidates = planner.generate_candidates(
        mdp, cfg.gamma_samples, (cfg.gamma_low, cfg.gamma_high),
        rng=stage_rng(cfg.master_seed, "plan"),
        failure_cost=cfg.collision_cost)
    total_planning = time.perf_counter() - t0

    trajectories: dict[str, Trajectory] = {}
    episode_records: dict[str, list[simulator.EpisodeRecord]] = {}
    samples_by_plan: dict[str, list[float]] = {}
    summary_rows: list[dict] = []

    index = {"gammas": [], "dedup": {}, "planning_time_s": {},
             "total_planning_time_s": round(total_planning, 1)}
    for cand in candidates:
        pid = cand.plan.id
        index["planning_time_s"][pid] = round(cand.planning_time_s, 1)
        for g in cand.gammas:
            index["gammas"].append(g)
            index["dedup"][f"{g:.12f}"] = pid
    index["gammas"].sort()

    for cand in candidates:
        pid = cand.plan.id
        trace = planner.linearize_trace(mdp, cand.plan)
        steps = steps_from_trace(trace)
        traj = refine(scenario, steps, plan_id=pid, helix=cfg.helix)
        trajectories[pid] = traj
        traj_path = out / f"trajectory_{pid}.csv"
        traj.export_csv(traj_path)

        write_plan_file(PlanFile(
            plan_id=pid,
            gamma=cand.first_gamma,
            actions=cand.plan.linearization,
            high_level_length=len(cand.plan.linearization),
            planning_time_s=round(cand.planning_time_s, 1),
            trajectory_ref=traj_path.name,
        ), out / f"plan_{pid}.json")

        records = simulator.run_batch(traj, scenario, cfg.disturbance,
                                      n=cfg.episodes, master_seed=cfg.master_seed,
                                      plan_id=pid)
        episode_records[pid] = records
        simulator.write_episode_log(records, out / f"episodes_{pid}.jsonl")
        samples_by_plan[pid] = [r.execution_time_s for r in records]

    report = _stamp(assess.build_report(samples_by_plan, cfg.metrics,
                                        alpha_mean=cfg.alpha_mean), cfg)
    report["gamma_by_plan"] = {c.plan.id: c.gammas for c in candidates}
    _write_json(out / "report.json", report)
    _write_json(out / "candidates.json", _stamp(index, cfg))

    for cand in candidates:
        pid = cand.plan.id
        m = report["metrics"][pid]
        summary_rows.append({
            "id": pid,
            "plan_schema": " -> ".join(cand.plan.linearization),
            "planning_time_s": f"{round(cand.planning_time_s, 1):.1f}",
            "high_level_length": len(cand.plan.linearization),
            "low_level_length_m": f"{trajectories[pid].total_length:.2f}",
            "mean_s": f"{m['mean']:.2f}",
            "variance": f"{m['variance']:.4f}",
            "entropy_bits": f"{m['entropy_bits']:.4f}",
        })
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_sha256={cfg.config_hash()} master_seed={cfg.master_seed}\n")
        writer = csv.DictWriter(fh, fieldnames=list(summary_rows[0].keys()))
        writer.writeheader()
        writer.writerows(summary_rows)

    return PipelineResult(candidates, trajectories, episode_records, report,
                          summary_rows, report["selection"]["selected"])
