"""Model layer: validation, induced chains, and the exact cost distribution."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import loop_mdp, make_chain, make_mdp, two_action_mdp
from riskplan.mdp import (ImproperPolicy, MissingPolicyEntry, NonConvergence,
                          Plan, expected_cost, goal_reach_probability,
                          induce_chain, reward_distribution_exact,
                          sample_history, validate)


class TestValidate:
    def test_clean_model_has_no_problems(self):
        assert validate(two_action_mdp()) == []

    def test_duplicate_state_id(self):
        m = make_mdp([("s", 0.0), ("s", 0.0), ("g", 0.0)],
                     [("s", "a", "g", 1.0)], "s", {"g"})
        assert any("duplicate state" in p for p in validate(m))

    def test_negative_cost(self):
        m = make_mdp([("s", -1.0), ("g", 0.0)],
                     [("s", "a", "g", 1.0)], "s", {"g"})
        assert any("negative cost" in p for p in validate(m))

    def test_probabilities_must_sum_to_one(self):
        m = make_mdp([("s", 0.0), ("g", 0.0)],
                     [("s", "a", "g", 0.7)], "s", {"g"})
        assert any("sum to 0.7" in p for p in validate(m))

    def test_unknown_references(self):
        m = make_mdp([("s", 0.0), ("g", 0.0)],
                     [("s", "a", "nowhere", 1.0)], "s", {"g"})
        assert any("unknown state" in p for p in validate(m))


class TestInduceChain:
    def test_goal_states_become_absorbing(self):
        chain = induce_chain(two_action_mdp(), Plan({"s0": "a", "pay10": "go"}))
        assert chain.edges["goal"] == [("goal", 1.0)]
        assert set(chain.states) == {"s0", "pay10", "goal"}

    def test_missing_entry_raises(self):
        with pytest.raises(MissingPolicyEntry) as exc:
            induce_chain(two_action_mdp(), Plan({"s0": "b"}))
        assert exc.value.state in {"pay2", "pay30"}

    def test_unreachable_states_are_dropped(self):
        chain = induce_chain(two_action_mdp(), Plan({"s0": "a", "pay10": "go"}))
        assert "pay2" not in chain.states


class TestExactDistribution:
    def test_deterministic_chain_single_atom(self):
        chain = make_chain({"s0": [("s1", 1.0)], "s1": [("g", 1.0)]},
                           {"s0": 1.0, "s1": 2.0, "g": 5.0}, "s0", {"g"})
        dist = reward_distribution_exact(chain)
        # the goal state's own cost never counts
        assert dist.mass == {3.0: pytest.approx(1.0)}
        assert dist.residual == pytest.approx(0.0)

    def test_geometric_loop_closed_form(self):
        chain = induce_chain(loop_mdp(0.5), Plan({"s0": "try"}))
        dist = reward_distribution_exact(chain, epsilon=1e-12)
        for k in range(1, 20):
            assert dist.mass[float(k)] == pytest.approx(0.5 ** k)
        assert dist.mean() == pytest.approx(2.0, abs=1e-9)
        assert dist.residual < 1e-12

    def test_branching_atoms(self):
        chain = induce_chain(two_action_mdp(),
                             Plan({"s0": "b", "pay2": "go", "pay30": "go"}))
        dist = reward_distribution_exact(chain)
        assert dist.mass[2.0] == pytest.approx(0.9)
        assert dist.mass[30.0] == pytest.approx(0.1)
        assert dist.mean() == pytest.approx(0.9 * 2 + 0.1 * 30)

    def test_trap_mass_goes_to_residual(self):
        chain = make_chain(
            {"s0": [("g", 0.7), ("trap", 0.3)], "trap": [("trap", 1.0)]},
            {"s0": 1.0, "trap": 1.0, "g": 0.0}, "s0", {"g"})
        dist = reward_distribution_exact(chain)
        assert dist.residual == pytest.approx(0.3)
        assert sum(dist.mass.values()) == pytest.approx(0.7)
        assert dist.total() == pytest.approx(1.0)

    def test_zero_cost_cycle_is_diagnosed(self):
        chain = make_chain(
            {"s0": [("a", 1.0)], "a": [("b", 1.0)], "b": [("a", 1.0)]},
            {"s0": 1.0, "a": 0.0, "b": 0.0, "g": 0.0}, "s0", {"g"})
        with pytest.raises(NonConvergence) as exc:
            reward_distribution_exact(chain)
        assert set(exc.value.cycle) == {"a", "b"}

    @given(p=st.floats(min_value=0.05, max_value=0.95))
    @settings(max_examples=25, deadline=None)
    def test_total_mass_is_conserved(self, p):
        chain = induce_chain(loop_mdp(p), Plan({"s0": "try"}))
        dist = reward_distribution_exact(chain, epsilon=1e-10)
        assert dist.total() == pytest.approx(1.0, abs=1e-12)
        assert dist.mean() == pytest.approx(1.0 / p, rel=1e-6)


class TestExpectedCostAndReachability:
    def test_loop_expected_cost(self):
        chain = induce_chain(loop_mdp(0.5), Plan({"s0": "try"}))
        assert expected_cost(chain) == pytest.approx(2.0, abs=1e-8)
        assert goal_reach_probability(chain) == 1.0

    def test_improper_chain_rejected(self):
        chain = make_chain(
            {"s0": [("g", 0.8), ("trap", 0.2)], "trap": [("trap", 1.0)]},
            {"s0": 1.0, "trap": 1.0, "g": 0.0}, "s0", {"g"})
        assert goal_reach_probability(chain) == pytest.approx(0.8)
        with pytest.raises(ImproperPolicy):
            expected_cost(chain)


class TestSampling:
    def test_deterministic_in_seed(self):
        chain = induce_chain(loop_mdp(0.3), Plan({"s0": "try"}))
        a = [sample_history(chain, rng=np.random.default_rng(5))
             for _ in range(10)]
        b = [sample_history(chain, rng=np.random.default_rng(5))
             for _ in range(10)]
        assert a == b

    def test_agrees_with_exact_distribution(self):
        chain = induce_chain(two_action_mdp(),
                             Plan({"s0": "b", "pay2": "go", "pay30": "go"}))
        exact = reward_distribution_exact(chain)
        rng = np.random.default_rng(0)
        samples = [sample_history(chain, rng=rng)[0] for _ in range(4000)]
        se = math.sqrt(exact.variance() / len(samples))
        assert abs(np.mean(samples) - exact.mean()) < 4 * se
