"""
Training Service - One seeded run of query-efficient active imitation learning

=== PER-STEP ORDER ===
1. Propose a from the epsilon-greedy policy on z = phi(s)
2. Safety gate: D(z, a) < tau -> ask the expert, execute a* instead
3. Environment step, store the transition in the replay buffer
4. Policy update on a buffer batch with r = log D - log(1 - D)
5. Joint discriminator / WAE update (policy batch vs expert batch)
6. SR update on buffer (s, s') pairs
7. Every T_Off steps: off-policy selection and expert labels
8. Threshold refresh at the end of every gate window

=== HALTING ===
- After run.total_steps environment steps
- Or, with agent.halt_on_budget and a non-zero budget, at the first episode
  end after the budget is exhausted

=== AUDIT ===
query log length == budget.used == oracle.queries at every step. Every
low-score step lands in one GateAudit bucket; a step with budget left and no
rate limit that does not execute the oracle's action counts as a violation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from activeil.config import ExperimentConfig
from activeil.core.exceptions import ConfigError, RunError
from activeil.core.numerics import AdamState
from activeil.environments import ExpertOracle, ImitationTask, Transition, make_environment, rollout_expert
from activeil.models.adversary import (
    AdversaryHyper, AdversaryOptim, Discriminator, PairBatch, adversary_train_step, encode_actions, score,
)
from activeil.models.ensemble import BootstrapEnsemble
from activeil.models.memory import ExpertDataset, QueryBudget, ReplayBuffer
from activeil.models.policy import PolicyModel, act, evaluate_greedy, imitation_rewards, policy_update
from activeil.models.representation import KernelSpec, WaeModel, encode
from activeil.models.successor import SrModel, sr_train_step, sr_vectors
from activeil.schemas.run import GateAuditSummary, MetricsRow, QueryKind, QueryRecord, RunSummary
from activeil.services.query_service import (
    GateDecision, SafetyGate, build_candidate_pool, coreset_select, gate_decision, offpolicy_query,
    random_select, uncertainty_select,
)
from activeil.utils.csv_io import format_action


# ============================================================
# RESULTS
# ============================================================

@dataclass
class TrainedModels:
    wae: WaeModel
    discriminator: Discriminator
    successor: SrModel
    policy: PolicyModel
    ensemble: Optional[BootstrapEnsemble] = None

    def parameter_sets(self) -> Dict[str, Any]:
        """Named MlpParams for checkpointing"""
        out = {
            "encoder": self.wae.encoder,
            "decoder": self.wae.decoder,
            "discriminator": self.discriminator.net,
            "sr_psi": self.successor.psi,
            "sr_target": self.successor.target,
            "policy_q": self.policy.q,
            "policy_target": self.policy.target,
        }
        if self.ensemble is not None:
            for k, head in enumerate(self.ensemble.heads):
                out[f"ensemble_{k}"] = head.q
        return out


@dataclass
class RunResult:
    seed: int
    strategy: str
    metrics: List[MetricsRow]
    queries: List[QueryRecord]
    summary: RunSummary
    models: TrainedModels
    task: ImitationTask


@dataclass
class _LossWindow:
    disc: List[float] = field(default_factory=list)
    wae: List[float] = field(default_factory=list)
    sr: List[float] = field(default_factory=list)
    policy: List[float] = field(default_factory=list)

    @staticmethod
    def _mean(values: List[float]) -> float:
        return float(np.mean(values)) if values else float("nan")

    def drain(self) -> Tuple[float, float, float, float]:
        out = (self._mean(self.disc), self._mean(self.wae), self._mean(self.sr), self._mean(self.policy))
        for values in (self.disc, self.wae, self.sr, self.policy):
            values.clear()
        return out


# ============================================================
# EXPERT SUBSTITUTION
# ============================================================

def expert_substitute(obs: np.ndarray, proposed: Any, state_id: str, oracle: ExpertOracle, budget: QueryBudget,
                      expert: ExpertDataset, add_to_expert: bool = True) -> Tuple[Any, bool]:
    """
    Replace the proposed action by the expert's answer

    Returns:
        (executed action, granted); with no budget left the proposed action
        comes back unchanged and nothing is recorded.
    """
    if not budget.try_consume():
        return proposed, False
    action = oracle.answer(obs)
    if add_to_expert:
        expert.add(obs, action, "onpolicy", state_id)
    return action, True


def expert_mean_return(task: ImitationTask, starts: List[Any]) -> float:
    """Mean undiscounted return of the simulated expert from the given starts"""
    returns = []
    for state in starts:
        total = 0.0
        for _ in range(task.max_episode_steps):
            state, r, done = task.simulate(state, task.optimal_action(state))
            total += r
            if done:
                break
        returns.append(total)
    return float(np.mean(returns))


# ============================================================
# TRAINING SERVICE
# ============================================================

class TrainingService:
    """Owns every piece of mutable state of a single seeded run"""

    def __init__(self, config: ExperimentConfig, seed: int):
        self.config = config
        self.seed = seed
        self.strategy = config.query.strategy
        self.step = 0
        self.log = logger.bind(seed=seed, strategy=self.strategy)

        streams = np.random.SeedSequence(seed).spawn(7)
        (self.init_rng, self.env_rng, self.act_rng, self.batch_rng,
         self.prior_rng, self.query_rng, self.eval_rng) = [np.random.default_rng(s) for s in streams]

        self.task = make_environment(config.env)
        if not self.task.discrete:
            raise ConfigError("The Q-learning policy needs discrete actions", ["env.continuous_actions"])
        self.oracle = ExpertOracle(self.task)
        self.budget = QueryBudget(config.agent.budget)
        self._build_models()

        mask_width = self.ensemble.n_heads if self.ensemble is not None else 0
        self.buffer = ReplayBuffer(config.agent.buffer_capacity, mask_width)
        self.expert = ExpertDataset()
        for tr in rollout_expert(self.oracle, config.agent.demo_episodes, self.env_rng):
            self.expert.add(tr.state, tr.action, "demo", self.task.state_id(tr.state))

        gate_cfg = config.gate
        self.gate: Optional[SafetyGate] = None
        if self.strategy == "coreset_sr" and gate_cfg.enabled:
            self.gate = SafetyGate(gate_cfg.alpha, gate_cfg.window, gate_cfg.threshold_mode, gate_cfg.fixed_tau,
                                   gate_cfg.min_query_gap, gate_cfg.guard_steps)

        self.eval_starts = [self.task.sample_start(self.eval_rng) for _ in range(config.run.eval_episodes)]
        self.queries: List[QueryRecord] = []
        self.metrics: List[MetricsRow] = []
        self.losses = _LossWindow()
        self.queries_onpolicy = 0
        self.queries_offpolicy = 0
        self.episode = 0

    def _build_models(self) -> None:
        cfg, task, rng = self.config, self.task, self.init_rng
        kernel = KernelSpec(
            cfg.wae.kernel,
            None if cfg.wae.bandwidth_mode == "median" else cfg.wae.bandwidth,
            tuple(cfg.wae.rq_alphas),
        )
        k = cfg.wae.latent_dim
        self.wae = WaeModel.create(task.obs_dim, k, cfg.wae.hidden, rng, cfg.wae.activation, kernel, cfg.wae.beta1)
        self.disc = Discriminator.create(k, task.action_dim, cfg.adversary.hidden, rng, cfg.wae.activation)
        self.sr = SrModel.create(k, cfg.successor.hidden, rng, cfg.successor.gamma, cfg.successor.target_sync,
                                 cfg.wae.activation)
        self.policy = PolicyModel.create(
            k, task.n_actions, cfg.policy.hidden, rng, cfg.wae.activation,
            gamma=cfg.policy.gamma,
            entropy_weight=cfg.policy.entropy_weight,
            sync_period=cfg.policy.target_sync,
            epsilon_start=cfg.policy.epsilon_start,
            epsilon_end=cfg.policy.epsilon_end,
            epsilon_decay_steps=cfg.policy.epsilon_decay_steps,
        )
        self.ensemble: Optional[BootstrapEnsemble] = None
        if self.strategy == "uncertainty":
            self.ensemble = BootstrapEnsemble.create(
                k, task.n_actions, cfg.policy.hidden, cfg.query.ensemble_heads, rng, cfg.policy.lr,
                cfg.query.bootstrap_p, cfg.policy.gamma, cfg.policy.target_sync, cfg.wae.activation,
            )
        self.hyper = AdversaryHyper(cfg.adversary.alpha1, cfg.adversary.alpha2, cfg.adversary.beta,
                                    cfg.policy.entropy_weight, cfg.adversary.lr, cfg.adversary.batch_size)
        self.adv_optim = AdversaryOptim.fresh(self.disc, self.wae, cfg.adversary.lr, cfg.wae.lr)
        self.sr_adam = AdamState.fresh(self.sr.psi, cfg.successor.lr)
        self.policy_adam = AdamState.fresh(self.policy.q, cfg.policy.lr)

    # ----- bookkeeping -----

    @property
    def tau(self) -> float:
        return self.gate.tau if self.gate is not None else 0.0

    def _log_query(self, kind: QueryKind, state_id: str, action: Any) -> None:
        self.queries.append(QueryRecord(step=self.step, kind=kind, state_id=state_id,
                                        expert_action=format_action(action), tau_at_query=self.tau))

    def _record_metrics(self) -> None:
        disc, wae, sr, pol = self.losses.drain()
        self.metrics.append(MetricsRow(
            seed=self.seed,
            step=self.step,
            episode=self.episode,
            greedy_return=evaluate_greedy(self.policy, self.wae, self.task, self.eval_starts),
            queries_onpolicy=self.queries_onpolicy,
            queries_offpolicy=self.queries_offpolicy,
            tau=self.tau,
            disc_loss=disc,
            wae_loss=wae,
            sr_loss=sr,
            policy_loss=pol,
        ))

    # ----- step phases -----

    def _gate(self, obs: np.ndarray, z: np.ndarray, action: int) -> Tuple[int, bool]:
        gate = self.gate
        if gate is None:
            return action, False
        s = score(self.disc, z, self.task.encode_action(action))
        gate.observe(s)
        if gate_decision(gate, s) is not GateDecision.QUERY_EXPERT:
            return action, False

        budget_left = not self.budget.exhausted
        capped = budget_left and gate.is_capped(self.step)
        sid = self.task.state_id(obs)
        executed, granted = action, False
        if budget_left and not capped:
            executed, granted = expert_substitute(obs, action, sid, self.oracle, self.budget, self.expert,
                                                  self.config.gate.add_to_expert_dataset)
        gate.audit.record(budget_left, capped, granted and executed == self.oracle.expert_action(obs))
        if not budget_left:
            self.log.warning(f"Gate trigger denied at step {self.step}: query budget exhausted")
        if not granted:
            return action, False
        gate.record_query(self.step)
        self.queries_onpolicy += 1
        self._log_query("onpolicy", sid, executed)
        self.log.debug(f"On-policy query at step {self.step}: score={s:.4f} tau={gate.tau:.4f}")
        return executed, True

    def _update_models(self) -> None:
        cfg = self.config
        if len(self.buffer) < max(cfg.policy.warmup_steps, 2):
            return

        # policy (and bootstrap heads) on imitation rewards
        batch = self.buffer.sample(self.batch_rng, cfg.policy.batch_size)
        self.policy, self.policy_adam, loss = policy_update(
            self.policy, batch, self.disc, self.wae, self.task, self.policy_adam
        )
        self.losses.policy.append(loss)
        if self.ensemble is not None:
            rewards = imitation_rewards(self.disc, self.wae, self.task, batch.states, batch.actions)
            z, z_next = encode(self.wae, batch.states), encode(self.wae, batch.next_states)
            self.ensemble.update(z, batch.actions, rewards, z_next, batch.dones, batch.masks)

        # discriminator + WAE
        if self.step % cfg.adversary.every_steps == 0:
            pol = self.buffer.sample(self.batch_rng, cfg.adversary.batch_size)
            policy_pairs = PairBatch(pol.states, encode_actions(self.task, pol.actions))
            expert_pairs = None
            if len(self.expert):
                states, actions = self.expert.sample(self.batch_rng, cfg.adversary.batch_size)
                expert_pairs = PairBatch(states, encode_actions(self.task, actions))
            self.disc, self.wae, self.adv_optim, parts = adversary_train_step(
                self.disc, self.wae, policy_pairs, expert_pairs, self.hyper, self.adv_optim, self.prior_rng
            )
            self.losses.disc.append(parts.classification)
            self.losses.wae.append(parts.wae)

        # successor representation
        sr_batch = self.buffer.sample(self.batch_rng, cfg.successor.batch_size)
        self.sr, self.sr_adam, loss = sr_train_step(
            self.sr, self.wae, sr_batch.states, sr_batch.next_states, sr_batch.dones, self.sr_adam
        )
        self.losses.sr.append(loss)

    def _offpolicy(self) -> None:
        cfg = self.config.query
        pool = build_candidate_pool(self.buffer, self.expert, cfg.max_candidates, self.query_rng)
        if len(pool) == 0:
            return
        if self.strategy == "coreset_sr":
            vectors = sr_vectors(self.sr, self.wae, pool.states)
            picked = coreset_select(vectors, cfg.n_k, pool.weights, cfg.kmedoids_max_iter).indices
            kind: QueryKind = "offpolicy"
        elif self.strategy == "random":
            picked = random_select(len(pool), cfg.n_k, self.query_rng)
            kind = "baseline"
        else:
            z = encode(self.wae, pool.states)
            picked = uncertainty_select(self.ensemble, z, pool.actions, pool.stamps, cfg.n_k)
            kind = "baseline"

        picked = [int(i) for i in picked]
        labels = offpolicy_query(pool.states[picked], [pool.state_ids[i] for i in picked],
                                 self.oracle, self.budget, self.expert)
        for label in labels:
            self._log_query(kind, label.state_id, label.action)
        self.queries_offpolicy += len(labels)
        self.log.info(f"Step {self.step}: {len(labels)} {kind} queries "
                      f"(pool {len(pool)}, budget left {self.budget.remaining})")

    def _buffer_scores(self) -> List[float]:
        entries = self.buffer.entries()[-self.config.query.max_candidates:]
        if not entries:
            return []
        states = np.stack([e.transition.state for e in entries])
        actions = encode_actions(self.task, [e.transition.action for e in entries])
        return list(np.atleast_1d(score(self.disc, encode(self.wae, states), actions)))

    # ----- main loop -----

    def run(self) -> RunResult:
        cfg = self.config
        self.log.info(f"🚀 Run start: {self.task.describe()['kind']}, budget {self.budget.limit}, "
                      f"{cfg.run.total_steps} steps, {len(self.expert)} demo pairs")
        obs, _ = self.task.reset(seed=int(self.env_rng.integers(2 ** 31)))
        halted = False
        for self.step in range(1, cfg.run.total_steps + 1):
            z = encode(self.wae, obs)
            action = act(self.policy, z, self.policy.epsilon(self.step), self.act_rng)
            action, intervened = self._gate(obs, z, action)

            next_obs, env_reward, terminated, truncated, _ = self.task.step(action)
            mask = self.ensemble.sample_mask(self.batch_rng) if self.ensemble is not None else None
            self.buffer.add(Transition(obs, action, next_obs, env_reward, terminated, intervened),
                            self.task.state_id(obs), mask)

            self._update_models()

            if cfg.query.offpolicy_enabled and self.step % cfg.query.t_off == 0 and not self.budget.exhausted:
                self._offpolicy()

            if self.gate is not None and self.gate.due(self.step):
                buffer_scores = self._buffer_scores() if self.gate.mode == "buffer" else None
                self.gate.maybe_update(self.step, buffer_scores)

            if terminated or truncated:
                self.episode += 1
                obs, _ = self.task.reset()
                if cfg.agent.halt_on_budget and self.budget.limit > 0 and self.budget.exhausted:
                    halted = True
            else:
                obs = next_obs

            if self.step % cfg.run.eval_interval == 0:
                self._record_metrics()
            if halted:
                break

        if halted and (not self.metrics or self.metrics[-1].step != self.step):
            self._record_metrics()
        if halted:
            self.log.info(f"Budget exhausted, halting at step {self.step}")
        return self._result()

    def _result(self) -> RunResult:
        audit = self.gate.audit if self.gate is not None else None
        final_return = self.metrics[-1].greedy_return if self.metrics else evaluate_greedy(
            self.policy, self.wae, self.task, self.eval_starts)
        summary = RunSummary(
            strategy=self.strategy,
            seed=self.seed,
            env_kind=self.config.env.kind,
            env_fingerprint=self.config.env.model_dump_json(),
            budget=self.budget.limit,
            total_steps=self.config.run.total_steps,
            steps_run=self.step,
            episodes=self.episode,
            queries_onpolicy=self.queries_onpolicy,
            queries_offpolicy=self.queries_offpolicy,
            oracle_calls=self.oracle.queries,
            final_return=final_return,
            expert_return=expert_mean_return(self.task, self.eval_starts),
            expert_dataset=self.expert.counts(),
            gate=GateAuditSummary(**vars(audit)) if audit is not None else GateAuditSummary(),
        )
        self.log.info(f"✅ Run done: return {summary.final_return:.2f} (expert {summary.expert_return:.2f}), "
                      f"{summary.total_queries} queries")
        models = TrainedModels(self.wae, self.disc, self.sr, self.policy, self.ensemble)
        return RunResult(self.seed, self.strategy, self.metrics, self.queries, summary, models, self.task)


def run_training(config: ExperimentConfig, seed: Optional[int] = None) -> RunResult:
    """
    Run one seed end to end

    Raises:
        ConfigError: the configuration cannot drive a run
        RunError: any other failure, with seed / strategy / step attached
    """
    seed = config.run.seeds[0] if seed is None else seed
    service: Optional[TrainingService] = None
    try:
        service = TrainingService(config, seed)
        return service.run()
    except ConfigError:
        raise
    except Exception as exc:
        context = {"seed": seed, "strategy": config.query.strategy, "step": service.step if service else 0}
        raise RunError(f"Training run failed: {exc}", context, cause=exc) from exc
