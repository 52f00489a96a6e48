import numpy as np
import pytest

from activeil.core.exceptions import ConfigError, RunError, TrainingDivergenceError
from activeil.environments import ExpertOracle
from activeil.models.memory import ExpertDataset, QueryBudget
from activeil.models.policy import policy_update
from activeil.services import training_service
from activeil.services.training_service import TrainingService, expert_substitute, run_training
from activeil.utils.csv_io import write_metrics_csv, write_query_log_csv


class TestExpertSubstitute:
    def test_budget_of_one(self, maze):
        oracle, budget, expert = ExpertOracle(maze), QueryBudget(1), ExpertDataset()
        obs = maze.observe(maze.maze.start_cells()[0])
        action, granted = expert_substitute(obs, 0, "a", oracle, budget, expert)
        assert granted and action == oracle.expert_action(obs)
        assert len(expert) == 1

        other = maze.observe(maze.maze.start_cells()[1])
        action, granted = expert_substitute(other, 3, "b", oracle, budget, expert)
        assert not granted and action == 3
        assert len(expert) == 1 and oracle.queries == 1 and budget.used == 1

    def test_without_adding_to_dataset(self, maze):
        oracle, budget, expert = ExpertOracle(maze), QueryBudget(5), ExpertDataset()
        obs = maze.observe(maze.maze.start_cells()[0])
        expert_substitute(obs, 0, "a", oracle, budget, expert, add_to_expert=False)
        assert len(expert) == 0 and budget.used == 1


class TestRunTraining:
    def test_zero_budget(self, tiny_config):
        result = run_training(tiny_config(agent={"budget": 0}))
        summary = result.summary
        assert summary.oracle_calls == 0 and result.queries == []
        assert summary.gate.substitutions == 0
        assert summary.steps_run == 300
        assert [row.step for row in result.metrics] == [100, 200, 300]

    def test_query_audit(self, tiny_config):
        result = run_training(tiny_config())
        s = result.summary
        assert s.gate.gate_triggers > 0
        assert s.gate.violations == 0
        assert len(result.queries) == s.total_queries == s.oracle_calls <= s.budget
        assert s.gate.substitutions == s.queries_onpolicy
        assert s.gate.gate_triggers == (s.gate.substitutions + s.gate.denied_budget + s.gate.deferred_cap
                                        + s.gate.violations)
        assert sum(q.kind == "onpolicy" for q in result.queries) == s.queries_onpolicy
        assert all(q.kind in ("onpolicy", "offpolicy") for q in result.queries)
        counts = s.expert_dataset
        assert counts["offpolicy"] == s.queries_offpolicy
        assert counts["demo"] > 0

    def test_without_rate_limit_every_low_score_with_budget_is_answered(self, tiny_config):
        result = run_training(tiny_config(gate={"min_query_gap": 1}, query={"t_off": 10_000}))
        audit = result.summary.gate
        assert audit.gate_triggers > 0
        assert audit.deferred_cap == 0
        assert audit.policy_ran_with_budget == 0
        assert audit.substitutions == result.summary.queries_onpolicy > 0

    def test_unanswered_low_scores_count_as_violations(self, tiny_config, monkeypatch):
        def ignore_expert(obs, proposed, state_id, oracle, budget, expert, add_to_expert=True):
            return (oracle.expert_action(obs) + 1) % 4, True

        monkeypatch.setattr(training_service, "expert_substitute", ignore_expert)
        audit = run_training(tiny_config(gate={"min_query_gap": 1}, query={"t_off": 10_000})).summary.gate
        assert audit.gate_triggers > 0
        assert audit.violations == audit.gate_triggers
        assert audit.substitutions == 0

    def test_policy_learns_through_policy_update(self, tiny_config, monkeypatch):
        calls = []

        def counting(*args, **kwargs):
            calls.append(1)
            return policy_update(*args, **kwargs)

        monkeypatch.setattr(training_service, "policy_update", counting)
        run_training(tiny_config(run={"total_steps": 60, "eval_interval": 60}))
        # one update per step once the buffer holds warmup_steps transitions
        assert len(calls) == 60 - 32 + 1

    def test_offpolicy_period_beyond_run(self, tiny_config):
        result = run_training(tiny_config(query={"t_off": 10_000}))
        assert result.summary.queries_offpolicy == 0

    def test_metric_losses_are_finite(self, tiny_config):
        result = run_training(tiny_config())
        for row in result.metrics:
            assert np.isfinite([row.disc_loss, row.wae_loss, row.sr_loss, row.policy_loss]).all()
            assert np.isfinite(row.greedy_return)

    @pytest.mark.parametrize("strategy", ["random", "uncertainty"])
    def test_baselines(self, tiny_config, strategy):
        result = run_training(tiny_config(query={"strategy": strategy}))
        assert result.summary.queries_onpolicy == 0
        assert all(q.kind == "baseline" for q in result.queries)
        assert result.summary.queries_offpolicy == len(result.queries) > 0
        assert (result.models.ensemble is not None) == (strategy == "uncertainty")

    def test_halts_when_budget_runs_out(self, tiny_config):
        result = run_training(tiny_config(agent={"budget": 3}, query={"t_off": 50}))
        s = result.summary
        assert s.oracle_calls == 3
        assert s.steps_run < 300
        assert result.metrics[-1].step == s.steps_run

    def test_is_deterministic(self, tiny_config, tmp_path):
        cfg = tiny_config()
        files = []
        for k in range(2):
            result = run_training(cfg, seed=4)
            metrics = write_metrics_csv(tmp_path / f"m{k}.csv", result.metrics)
            queries = write_query_log_csv(tmp_path / f"q{k}.csv", result.queries)
            files.append((metrics.read_bytes(), queries.read_bytes()))
        assert files[0] == files[1]

    def test_lifted_nav_smoke(self, tiny_config):
        for seed in (1, 2, 3):
            result = run_training(tiny_config(env={"kind": "lifted_nav", "obs_dim": 12, "nav_max_steps": 40}),
                                  seed=seed)
            assert result.summary.env_kind == "lifted_nav"
            for row in result.metrics:
                assert np.isfinite([row.disc_loss, row.wae_loss, row.sr_loss, row.policy_loss]).all()

    def test_continuous_actions_are_rejected(self, tiny_config):
        with pytest.raises(ConfigError):
            run_training(tiny_config(env={"kind": "lifted_nav", "continuous_actions": True}))

    def test_failures_carry_run_context(self, tiny_config, monkeypatch):
        def diverge(self):
            if self.step == 7:
                raise TrainingDivergenceError("boom")

        monkeypatch.setattr(TrainingService, "_update_models", diverge)
        with pytest.raises(RunError) as err:
            run_training(tiny_config(), seed=5)
        assert err.value.context == {"seed": 5, "strategy": "coreset_sr", "step": 7}
        assert isinstance(err.value.cause, TrainingDivergenceError)
