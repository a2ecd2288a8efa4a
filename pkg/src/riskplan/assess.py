"""Risk metrics over execution-time samples and plan selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

from scipy import stats as _st

DEFAULT_BIN_WIDTH = 5.0
DEFAULT_ALPHA = 0.9
DEFAULT_TIME_BOUND = 600.0
DEFAULT_ALPHA_MEAN = 0.05


class InsufficientSamples(Exception):
    pass


@dataclass(frozen=True)
class MetricConfig:
    bin_width: float = DEFAULT_BIN_WIDTH
    alpha: float = DEFAULT_ALPHA
    time_bound: float = DEFAULT_TIME_BOUND

    def __post_init__(self):
        if self.bin_width <= 0:
            raise ValueError("bin width must be positive")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must be in (0,1)")


@dataclass(frozen=True)
class RiskMetrics:
    count: int
    mean: float
    variance: float
    entropy_bits: float
    var_alpha: float
    es_alpha: float
    bounded_prob: float
    bin_width: float
    alpha: float
    time_bound: float


def compute_metrics(samples: list[float], config: MetricConfig = MetricConfig()) -> RiskMetrics:
    """Empirical mean/variance/entropy plus tail metrics.

    Entropy uses fixed-width bins anchored at 0.  The value at risk is the
    upper order statistic at rank ceil(alpha * n); the expected shortfall
    averages the samples strictly above it (or equals it when none are).
    """
    n = len(samples)
    if n < 2:
        raise InsufficientSamples(f"need at least 2 samples, got {n}")
    mean = sum(samples) / n
    variance = sum((x - mean) ** 2 for x in samples) / (n - 1)

    bins: dict[int, int] = {}
    for x in samples:
        b = math.floor(x / config.bin_width)
        bins[b] = bins.get(b, 0) + 1
    entropy = -sum((c / n) * math.log2(c / n) for c in bins.values())

    ordered = sorted(samples)
    rank = math.ceil(config.alpha * n)  # 1-based
    var_alpha = ordered[min(rank, n) - 1]
    tail = [x for x in ordered if x > var_alpha]
    es_alpha = sum(tail) / len(tail) if tail else var_alpha
    bounded_prob = sum(1 for x in samples if x > config.time_bound) / n

    return RiskMetrics(n, mean, variance, entropy, var_alpha, es_alpha,
                       bounded_prob, config.bin_width, config.alpha,
                       config.time_bound)


@dataclass
class Elimination:
    plan_id: str
    reason: str


@dataclass
class SelectionResult:
    selected: str
    eliminated: list[Elimination]

    def to_doc(self) -> dict:
        return {"selected": self.selected,
                "eliminated": [asdict(e) for e in self.eliminated]}


def select(table: list[tuple[str, RiskMetrics]],
           alpha_mean: float = DEFAULT_ALPHA_MEAN) -> SelectionResult:
    """Mean-filter then minimize variance; ties by entropy, mean, plan id.

    Plans whose mean exceeds (1 + alpha_mean) times the best mean are
    eliminated up front; the justification records why each loser fell.
    """
    if not table:
        raise ValueError("selection table is empty")
    best_mean = min(m.mean for _, m in table)
    cutoff = (1.0 + alpha_mean) * best_mean
    kept = [(pid, m) for pid, m in table if m.mean <= cutoff]
    eliminated = [
        Elimination(pid, f"mean {m.mean:.3f} exceeds cutoff {cutoff:.3f} "
                         f"(best mean {best_mean:.3f}, alpha_mean {alpha_mean})")
        for pid, m in table if m.mean > cutoff
    ]
    winner = min(kept, key=lambda pm: (pm[1].variance, pm[1].entropy_bits,
                                       pm[1].mean, pm[0]))
    for pid, m in kept:
        if pid == winner[0]:
            continue
        if m.variance != winner[1].variance:
            why = f"variance {m.variance:.4f} above selected {winner[1].variance:.4f}"
        elif m.entropy_bits != winner[1].entropy_bits:
            why = f"entropy {m.entropy_bits:.4f} above selected {winner[1].entropy_bits:.4f}"
        elif m.mean != winner[1].mean:
            why = f"mean {m.mean:.4f} above selected {winner[1].mean:.4f}"
        else:
            why = "identical metrics, larger plan id"
        eliminated.append(Elimination(pid, why))
    return SelectionResult(winner[0], eliminated)


def compare_means(a: list[float], b: list[float]) -> tuple[float, float]:
    """Welch's unequal-variance t test; advisory, never overrides select."""
    if len(a) < 2 or len(b) < 2:
        raise InsufficientSamples("need at least 2 samples per group")
    na, nb = len(a), len(b)
    ma, mb = sum(a) / na, sum(b) / nb
    va = sum((x - ma) ** 2 for x in a) / (na - 1)
    vb = sum((x - mb) ** 2 for x in b) / (nb - 1)
    se2 = va / na + vb / nb
    if se2 == 0.0:
        return (0.0, 1.0) if ma == mb else (math.copysign(math.inf, ma - mb), 0.0)
    t = (ma - mb) / math.sqrt(se2)
    df = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    p = 2.0 * float(_st.t.sf(abs(t), df))
    return t, min(p, 1.0)


def build_report(
    samples_by_plan: dict[str, list[float]],
    config: MetricConfig = MetricConfig(),
    alpha_mean: float = DEFAULT_ALPHA_MEAN,
) -> dict:
    """Assessment report: per-plan metrics, selection justification, and
    Welch comparisons of the selected plan against every rival."""
    metrics = {pid: compute_metrics(s, config) for pid, s in samples_by_plan.items()}
    selection = select(sorted(metrics.items()), alpha_mean=alpha_mean)
    winner = selection.selected
    welch = {}
    for pid in sorted(samples_by_plan):
        if pid == winner:
            continue
        t, p = compare_means(samples_by_plan[winner], samples_by_plan[pid])
        welch[pid] = {"t": t, "p": p}
    return {
        "format_version": 1,
        "metrics": {pid: asdict(m) for pid, m in sorted(metrics.items())},
        "samples": {pid: list(s) for pid, s in sorted(samples_by_plan.items())},
        "selection": selection.to_doc(),
        "welch_vs_selected": welch,
    }
