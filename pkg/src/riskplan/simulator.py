"""Disturbed kinematic execution of refined trajectories.

A point robot chases the trajectory samples at their commanded speed under
Gaussian current drift; obstacles are displaced once per episode; coming
closer to an obstacle than the clearance threshold logs an incident and
adds a recovery time penalty.  Every episode is a pure function of its
seed tuple (master seed, plan id, episode index).
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field, asdict

import numpy as np

from .refiner import Trajectory
from .scenario import Obstacle, Scenario

SIM_DT = 0.1
TIMEOUT_FACTOR = 10.0


@dataclass(frozen=True)
class DisturbanceConfig:
    current_sigma: float = 0.05        # m/s, per-axis drift
    obstacle_sigma: float = 0.3        # m, one-shot displacement
    capture_radius: float = 0.3        # m
    clearance: float = 0.5             # m, incident threshold
    recovery_penalty_s: float = 20.0
    perturb_target: str | None = "sm_tank"  # obstacle label; None moves nothing
    perturb_all: bool = False
    abort_on_collision: bool = False

    def __post_init__(self):
        for name in ("current_sigma", "obstacle_sigma", "capture_radius",
                     "clearance", "recovery_penalty_s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class Incident:
    time: float
    obstacle: str
    min_distance: float


@dataclass
class EpisodeRecord:
    plan_id: str
    episode_index: int
    execution_time_s: float
    incidents: list[Incident]
    completed: bool
    seed: tuple[int, str, int]


def episode_rng(master_seed: int, plan_id: str, episode_index: int) -> np.random.Generator:
    """Named stream derivation so episodes never depend on scheduling."""
    plan_key = zlib.crc32(plan_id.encode("utf-8"))
    return np.random.default_rng(
        np.random.SeedSequence([master_seed, plan_key, episode_index]))


def _box_distance(point: np.ndarray, center: np.ndarray, half: np.ndarray) -> float:
    gap = np.maximum(np.abs(point - center) - half, 0.0)
    return float(np.linalg.norm(gap))


def _perturbed_obstacles(scenario: Scenario, cfg: DisturbanceConfig,
                         rng: np.random.Generator) -> list[tuple[str, np.ndarray, np.ndarray]]:
    out = []
    for o in scenario.obstacles:
        center = np.asarray(o.center, dtype=float)
        movable = cfg.perturb_all or o.label == cfg.perturb_target
        if movable and cfg.obstacle_sigma > 0:
            center = center + rng.normal(0.0, cfg.obstacle_sigma, size=3)
        out.append((o.label, center, np.asarray(o.half_extents, dtype=float)))
    return out


def run_episode(
    trajectory: Trajectory,
    scenario: Scenario,
    cfg: DisturbanceConfig,
    seed: tuple[int, str, int],
    dt: float = SIM_DT,
) -> EpisodeRecord:
    if not trajectory.samples:
        raise ValueError("trajectory must be nonempty")
    master, plan_id, episode_index = seed
    rng = episode_rng(master, plan_id, episode_index)
    obstacles = _perturbed_obstacles(scenario, cfg, rng)

    samples = trajectory.samples
    pos = np.asarray(samples[0].position, dtype=float)
    k = 1
    sim_time = 0.0
    incidents: list[Incident] = []
    in_contact: set[str] = set()
    timeout = max(TIMEOUT_FACTOR * trajectory.nominal_duration, 10.0)

    while k < len(samples):
        # move for one tick, consuming samples as the capture radius allows
        budget = dt
        leftover = 0.0
        while budget > 0.0 and k < len(samples):
            target = np.asarray(samples[k].position, dtype=float)
            speed = max(samples[k].speed, 1e-6)
            gap = target - pos
            dist = float(np.linalg.norm(gap))
            reach = max(dist - cfg.capture_radius, 0.0)
            if reach > speed * budget:
                pos = pos + gap / dist * speed * budget
                budget = 0.0
            else:
                if dist > 0.0:
                    pos = pos + gap / dist * reach
                budget -= reach / speed
                k += 1
                if k == len(samples):
                    leftover = budget
        if cfg.current_sigma > 0:
            pos = pos + rng.normal(0.0, cfg.current_sigma, size=3) * dt
        sim_time += dt - leftover

        touching = set()
        for label, center, half in obstacles:
            d = _box_distance(pos, center, half)
            if d < cfg.clearance:
                touching.add(label)
                if label not in in_contact:
                    incidents.append(Incident(round(sim_time, 6), label, round(d, 6)))
                    sim_time += cfg.recovery_penalty_s
                    if cfg.abort_on_collision:
                        return EpisodeRecord(plan_id, episode_index, sim_time,
                                             incidents, False, seed)
        in_contact = touching

        if sim_time > timeout:
            return EpisodeRecord(plan_id, episode_index, sim_time, incidents, False, seed)

    return EpisodeRecord(plan_id, episode_index, round(sim_time, 6),
                         incidents, True, seed)


def run_batch(
    trajectory: Trajectory,
    scenario: Scenario,
    cfg: DisturbanceConfig,
    n: int = 10,
    master_seed: int = 0,
    plan_id: str | None = None,
    dt: float = SIM_DT,
) -> list[EpisodeRecord]:
    """n independent episodes with seed tuples (master, plan, 0..n-1)."""
    if n < 1:
        raise ValueError("need at least one episode")
    pid = trajectory.plan_id if plan_id is None else plan_id
    return [run_episode(trajectory, scenario, cfg, (master_seed, pid, i), dt=dt)
            for i in range(n)]


def write_episode_log(records: list[EpisodeRecord], path):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            doc = asdict(r)
            doc["seed"] = list(doc["seed"])
            fh.write(json.dumps(doc, sort_keys=True) + "\n")


def read_episode_log(path) -> list[EpisodeRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            doc = json.loads(line)
            out.append(EpisodeRecord(
                plan_id=doc["plan_id"],
                episode_index=doc["episode_index"],
                execution_time_s=doc["execution_time_s"],
                incidents=[Incident(**i) for i in doc["incidents"]],
                completed=doc["completed"],
                seed=(doc["seed"][0], doc["seed"][1], doc["seed"][2]),
            ))
    return out
