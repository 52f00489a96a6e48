import math

import numpy as np
import pytest

from activeil.core.numerics import AdamState, MlpParams, MlpSpec
from activeil.environments import ExpertOracle, Transition
from activeil.models.ensemble import BootstrapEnsemble
from activeil.models.memory import ExpertDataset, QueryBudget, ReplayBuffer
from activeil.models.policy import PolicyModel
from activeil.services.query_service import (
    GateAudit, GateDecision, SafetyGate, build_candidate_pool, coreset_select, gate_decision, offpolicy_query, random_select,
    threshold_from_buffer, uncertainty_select, update_threshold,
)


class TestGate:
    def test_initial_threshold_never_queries(self):
        gate = SafetyGate()
        assert gate.tau == 0.0
        assert gate_decision(gate, 1e-7) is GateDecision.FOLLOW_POLICY

    def test_low_score_queries(self):
        gate = SafetyGate(tau=0.3)
        assert gate_decision(gate, 0.01) is GateDecision.QUERY_EXPERT

    def test_boundary_follows_policy(self):
        assert gate_decision(SafetyGate(tau=0.3), 0.3) is GateDecision.FOLLOW_POLICY

    def test_fixed_mode_starts_at_fixed_tau(self):
        gate = SafetyGate(mode="fixed", fixed_tau=0.2, window=2)
        gate.observe(0.9)
        gate.observe(0.8)
        assert gate.maybe_update(2)
        assert gate.tau == 0.2

    def test_window_update(self):
        gate = SafetyGate(alpha=0.2, window=10)
        for s in np.linspace(0.1, 1.0, 10):
            gate.observe(s)
        assert not gate.maybe_update(9)
        assert gate.maybe_update(10)
        assert gate.tau == pytest.approx(0.2)
        assert gate.scores == []

    def test_rate_limit_only_early(self):
        gate = SafetyGate(min_query_gap=10, guard_steps=100)
        assert not gate.is_capped(5)
        gate.record_query(5)
        assert gate.is_capped(14)
        assert not gate.is_capped(15)
        gate.record_query(95)
        assert not gate.is_capped(100)

    def test_audit_buckets(self):
        audit = GateAudit()
        audit.record(budget_left=False, capped=False, expert_executed=False)
        audit.record(budget_left=True, capped=True, expert_executed=False)
        audit.record(budget_left=True, capped=False, expert_executed=True)
        audit.record(budget_left=True, capped=False, expert_executed=False)
        assert (audit.denied_budget, audit.deferred_cap, audit.substitutions, audit.violations) == (1, 1, 1, 1)
        assert audit.gate_triggers == 4
        assert audit.policy_ran_with_budget == 2


class TestUpdateThreshold:
    def test_second_smallest_of_ten(self):
        scores = [0.1 * k for k in range(1, 11)]
        assert update_threshold(scores, 0.2) == pytest.approx(0.2)

    def test_all_equal(self):
        assert update_threshold([0.37] * 25, 0.05) == 0.37

    def test_exactly_four_below(self, rng):
        scores = rng.permutation(np.linspace(0.0, 1.0, 100))
        tau = update_threshold(scores, 0.05)
        assert int(np.sum(scores < tau)) == 4

    @pytest.mark.parametrize("seed", range(100))
    def test_quantile_properties(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 300))
        alpha = float(rng.uniform(0.01, 0.99))
        scores = np.round(rng.random(n), 2)
        tau = update_threshold(scores, alpha)
        assert tau in scores
        assert np.mean(scores < tau) < alpha + 1.0 / n

    def test_empty_keeps_current(self):
        assert update_threshold([], 0.05, current=0.4) == 0.4

    def test_buffer_mode(self):
        assert threshold_from_buffer(np.arange(20) / 20.0, 0.1) == pytest.approx(0.05)


class TestCoreset:
    def test_single_medoid_exhaustive(self):
        result = coreset_select(np.array([[0.0], [1.0], [10.0]]), 1)
        assert result.indices == [1]
        assert result.cost == pytest.approx(10.0)

    def test_as_many_medoids_as_points(self, rng):
        result = coreset_select(rng.normal(size=(5, 2)), 5)
        assert sorted(result.indices) == list(range(5))
        assert result.cost == 0.0

    def test_weights_pull_the_medoid(self):
        points = np.array([[0.0], [1.0], [10.0]])
        assert coreset_select(points, 1, weights=np.array([1.0, 1.0, 5.0])).indices == [2]

    @pytest.mark.parametrize("seed", range(50))
    def test_cost_never_increases(self, seed):
        rng = np.random.default_rng(seed)
        result = coreset_select(rng.normal(size=(40, 3)), int(rng.integers(2, 8)), rng.random(40) + 0.1)
        assert np.all(np.diff(result.history) <= 1e-12)
        assert len(set(result.indices)) == len(result.indices)

    def test_recovers_three_clusters(self):
        centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
        recovered = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            labels = np.repeat(np.arange(3), 30)
            points = centers[labels] + rng.normal(size=(90, 2))
            indices = coreset_select(points, 3).indices
            recovered += sorted(labels[indices].tolist()) == [0, 1, 2]
        assert recovered >= 19

    def test_empty_and_invalid(self):
        assert coreset_select(np.zeros((0, 2)), 3).indices == []
        with pytest.raises(ValueError):
            coreset_select(np.zeros((3, 2)), 0)


class TestBaselines:
    def test_random_full_draw_is_permutation(self, rng):
        assert sorted(random_select(10, 10, rng).tolist()) == list(range(10))

    def test_random_is_reproducible(self):
        a = random_select(50, 5, np.random.default_rng(9))
        b = random_select(50, 5, np.random.default_rng(9))
        np.testing.assert_array_equal(a, b)

    def test_random_is_uniform(self):
        rng = np.random.default_rng(0)
        counts = np.bincount([random_select(10, 1, rng)[0] for _ in range(10_000)], minlength=10)
        sd = math.sqrt(10_000 * 0.1 * 0.9)
        assert np.all(np.abs(counts - 1000) <= 3 * sd)

    @staticmethod
    def _ensemble(tables):
        heads = []
        for table in tables:
            table = np.asarray(table, dtype=float)
            spec = MlpSpec((table.shape[0], table.shape[1]))
            q = MlpParams(spec, [table], [np.zeros(table.shape[1])])
            heads.append(PolicyModel(q, q.copy()))
        return BootstrapEnsemble(heads, [AdamState.fresh(h.q) for h in heads])

    def test_uncertainty_matches_direct_std(self):
        q_a = np.array([[0.0, 1.0], [2.0, 2.0], [5.0, -1.0]])
        q_b = np.array([[0.0, 3.0], [1.0, 2.0], [-5.0, -1.0]])
        ens = self._ensemble([q_a, q_b])
        z, actions = np.eye(3), [1, 0, 0]
        spread = np.std([q_a[[0, 1, 2], actions], q_b[[0, 1, 2], actions]], axis=0)
        expected = np.argsort(-spread, kind="stable")[:2]
        np.testing.assert_array_equal(uncertainty_select(ens, z, actions, np.arange(3), 2), expected)

    def test_identical_heads_fall_back_to_recency(self):
        table = np.ones((4, 2))
        ens = self._ensemble([table, table])
        picked = uncertainty_select(ens, np.eye(4), [0, 1, 0, 1], np.array([3, 9, 1, 7]), 2)
        assert picked.tolist() == [1, 3]


def _buffer_with(maze, cells, capacity=100):
    buffer = ReplayBuffer(capacity)
    for cell in cells:
        obs = maze.observe(cell)
        nxt, r, done = maze.simulate(cell, 1)
        buffer.add(Transition(obs, 1, maze.observe(nxt), r, done), maze.state_id(obs))
    return buffer


class TestCandidatesAndQueries:
    def test_pool_collapses_and_excludes_labeled(self, maze, rng):
        a, b, c = maze.maze.start_cells()[:3]
        cells = [a, b, a, c, a]
        buffer = _buffer_with(maze, cells)
        expert = ExpertDataset()
        first = maze.observe(b)
        expert.add(first, 0, "demo", maze.state_id(first))
        pool = build_candidate_pool(buffer, expert, 100, rng)
        assert maze.state_id(first) not in pool.state_ids
        assert len(set(pool.state_ids)) == len(pool)
        assert pool.state_ids == [maze.state_id(maze.observe(a)), maze.state_id(maze.observe(c))]
        assert pool.weights.tolist() == [3.0, 1.0]

    def test_pool_is_capped(self, maze, rng):
        buffer = _buffer_with(maze, maze.maze.start_cells()[:30])
        assert len(build_candidate_pool(buffer, ExpertDataset(), 7, rng)) == 7

    def test_offpolicy_query_labels_and_dedups(self, maze):
        oracle, expert, budget = ExpertOracle(maze), ExpertDataset(), QueryBudget(10)
        cells = maze.maze.start_cells()[:5]
        states = np.stack([maze.observe(c) for c in cells])
        ids = [maze.state_id(s) for s in states]
        expert.add(states[0], maze.optimal_action(cells[0]), "demo", ids[0])
        labels = offpolicy_query(states, ids, oracle, budget, expert)
        assert [lab.state_id for lab in labels] == ids[1:]
        assert all(lab.action == maze.optimal_action(c) for lab, c in zip(labels, cells[1:]))
        assert budget.used == oracle.queries == 4

    def test_offpolicy_query_respects_budget(self, maze):
        oracle, expert, budget = ExpertOracle(maze), ExpertDataset(), QueryBudget(2)
        cells = maze.maze.start_cells()[:5]
        states = np.stack([maze.observe(c) for c in cells])
        labels = offpolicy_query(states, [maze.state_id(s) for s in states], oracle, budget, expert)
        assert len(labels) == 2 and oracle.queries == 2 and len(expert) == 2
