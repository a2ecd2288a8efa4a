"""Risk metrics, the selection rule, and the Welch comparison."""

import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as scipy_stats

from riskplan.assess import (InsufficientSamples, MetricConfig, RiskMetrics,
                             build_report, compare_means, compute_metrics,
                             select)


def metrics_row(mean, variance, entropy):
    """Fixture RiskMetrics with only the selector-relevant fields set."""
    return RiskMetrics(count=10, mean=mean, variance=variance,
                       entropy_bits=entropy, var_alpha=0.0, es_alpha=0.0,
                       bounded_prob=0.0, bin_width=5.0, alpha=0.9,
                       time_bound=600.0)


class TestMetrics:
    def test_constant_samples(self):
        m = compute_metrics([42.0] * 8)
        assert m.variance == 0.0
        assert m.entropy_bits == 0.0

    def test_four_bin_uniform_entropy(self):
        # one sample per 5 s bin: 4 equally likely bins => 2 bits
        m = compute_metrics([1.0, 6.0, 11.0, 16.0])
        assert m.entropy_bits == pytest.approx(2.0)

    def test_var_es_convention(self):
        m = compute_metrics([float(i) for i in range(1, 11)])
        assert m.var_alpha == 9.0
        assert m.es_alpha == 10.0

    def test_variance_is_unbiased(self):
        samples = [3.0, 7.0, 8.0, 12.0, 9.0]
        m = compute_metrics(samples)
        assert m.variance == pytest.approx(statistics.variance(samples))

    def test_bounded_probability(self):
        m = compute_metrics([500.0, 590.0, 700.0, 650.0],
                            MetricConfig(time_bound=600.0))
        assert m.bounded_prob == 0.5

    def test_too_few_samples(self):
        with pytest.raises(InsufficientSamples):
            compute_metrics([1.0])

    @given(st.lists(st.floats(min_value=0.0, max_value=1e4), min_size=2,
                    max_size=40))
    @settings(max_examples=100, deadline=None)
    def test_var_never_exceeds_es(self, samples):
        m = compute_metrics(samples)
        assert m.var_alpha <= m.es_alpha
        assert m.entropy_bits >= 0.0
        assert m.var_alpha in samples


TABLE_I = [
    ("P1", metrics_row(293.0, 1.92, 1.6)),
    ("P2", metrics_row(297.0, 1.8, 1.6)),
    ("P3", metrics_row(322.0, 0.17, 1.6)),
    ("P4", metrics_row(294.0, 0.02, 0.2)),
    ("P5", metrics_row(305.0, 0.1, 1.6)),
]


class TestSelect:
    def test_reference_table_picks_p4(self):
        result = select(TABLE_I)
        assert result.selected == "P4"

    def test_reference_table_justifies_p3(self):
        result = select(TABLE_I)
        p3 = next(e for e in result.eliminated if e.plan_id == "P3")
        assert "cutoff" in p3.reason
        assert all(e.plan_id != "P4" for e in result.eliminated)

    def test_mean_filter_cutoff(self):
        # the cutoff is (1 + alpha_mean) times the best mean
        rows = [("A", metrics_row(100.0, 5.0, 1.0)),
                ("B", metrics_row(105.1, 0.0, 1.0))]
        assert select(rows, alpha_mean=0.05).selected == "A"
        assert select(rows, alpha_mean=0.06).selected == "B"

    def test_entropy_breaks_variance_ties(self):
        rows = [("A", metrics_row(10.0, 1.0, 2.0)),
                ("B", metrics_row(10.0, 1.0, 1.0))]
        assert select(rows).selected == "B"

    def test_id_breaks_total_ties(self):
        rows = [("B", metrics_row(10.0, 1.0, 1.0)),
                ("A", metrics_row(10.0, 1.0, 1.0))]
        result = select(rows)
        assert result.selected == "A"
        assert result.eliminated[0].reason == "identical metrics, larger plan id"

    def test_empty_table_rejected(self):
        with pytest.raises(ValueError):
            select([])


class TestWelch:
    def test_matches_scipy(self):
        a = [10.0, 12.0, 11.0, 13.0, 9.0]
        b = [14.0, 16.0, 15.0, 13.0, 17.0]
        t, p = compare_means(a, b)
        ref = scipy_stats.ttest_ind(a, b, equal_var=False)
        assert t == pytest.approx(ref.statistic)
        assert p == pytest.approx(ref.pvalue)

    def test_identical_constants(self):
        assert compare_means([5.0, 5.0], [5.0, 5.0]) == (0.0, 1.0)

    def test_distinct_constants(self):
        t, p = compare_means([5.0, 5.0], [6.0, 6.0])
        assert t == -math.inf
        assert p == 0.0

    def test_same_distribution_rarely_significant(self):
        rng = np.random.default_rng(12)
        a = list(rng.normal(100, 5, 30))
        b = list(rng.normal(100, 5, 30))
        _, p = compare_means(a, b)
        assert p > 0.01

    def test_needs_two_samples_each(self):
        with pytest.raises(InsufficientSamples):
            compare_means([1.0], [2.0, 3.0])


class TestReport:
    def test_structure_and_welch_block(self):
        samples = {"P1": [10.0, 11.0, 10.5], "P2": [20.0, 21.0, 19.0]}
        report = build_report(samples)
        assert report["format_version"] == 1
        assert report["selection"]["selected"] == "P1"
        assert set(report["metrics"]) == {"P1", "P2"}
        assert set(report["welch_vs_selected"]) == {"P2"}
        assert report["welch_vs_selected"]["P2"]["p"] < 0.05
