"""
Policy - epsilon-greedy Q-learning over the WAE latent space

The learner never sees environment rewards: policy_update recomputes the
imitation reward log D - log(1 - D) for every sampled pair from the current
discriminator. With entropy_weight lambda > 0 the bootstrap value is the soft
maximum lambda * logsumexp(Q / lambda) instead of max Q.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from activeil.core.exceptions import ShapeError, TrainingDivergenceError
from activeil.core.numerics import (
    AdamState, MlpParams, MlpSpec, adam_step, init_params, mlp_backward, mlp_forward, mlp_forward_cached,
)
from activeil.environments.base import ImitationTask
from activeil.models.adversary import Discriminator, encode_actions, reward
from activeil.models.memory import TransitionBatch
from activeil.models.representation import WaeModel, encode


@dataclass
class PolicyModel:
    q: MlpParams
    target: MlpParams
    gamma: float = 0.95
    entropy_weight: float = 0.0
    sync_period: int = 200
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 5000
    updates: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("Policy discount must lie in [0, 1)")
        if self.q.spec != self.target.spec:
            raise ShapeError("Q and target networks differ in shape")

    @property
    def n_actions(self) -> int:
        return self.q.spec.output_size

    @classmethod
    def create(cls, latent_dim: int, n_actions: int, hidden: Sequence[int], rng: np.random.Generator,
               activation: str = "tanh", **kwargs: Any) -> "PolicyModel":
        q = init_params(MlpSpec((latent_dim, *hidden, n_actions), activation, "identity"), rng)
        return cls(q, q.copy(), **kwargs)

    def epsilon(self, step: int) -> float:
        """Linear decay from epsilon_start to epsilon_end over epsilon_decay_steps"""
        frac = min(max(step, 0) / self.epsilon_decay_steps, 1.0)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


def q_values(policy: PolicyModel, z) -> np.ndarray:
    return mlp_forward(policy.q, z)


def act(policy: PolicyModel, z, epsilon: float, rng: np.random.Generator) -> int:
    """Uniform action with probability epsilon, else argmax Q (first index on ties)"""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(policy.n_actions))
    return int(np.argmax(q_values(policy, np.asarray(z, dtype=float))))


def _bootstrap(policy: PolicyModel, z_next: np.ndarray) -> np.ndarray:
    q_next = mlp_forward(policy.target, z_next)
    lam = policy.entropy_weight
    if lam > 0.0:
        return lam * logsumexp(q_next / lam, axis=1)
    return q_next.max(axis=1)


def q_loss_and_grads(policy: PolicyModel, z, actions, rewards, z_next, dones) -> Tuple[float, MlpParams]:
    """Mean squared TD error of Q(z, a) against r + gamma * (1 - done) * V'(z')"""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    z_next = np.atleast_2d(np.asarray(z_next, dtype=float))
    actions = np.asarray(actions, dtype=int).reshape(-1)
    rewards = np.asarray(rewards, dtype=float).reshape(-1)
    dones = np.asarray(dones, dtype=float).reshape(-1)
    n = len(z)
    if not len(actions) == len(rewards) == len(dones) == len(z_next) == n:
        raise ShapeError("Q-learning batch arrays differ in length")

    targets = rewards + policy.gamma * (1.0 - dones) * _bootstrap(policy, z_next)
    if not np.all(np.isfinite(targets)):
        raise TrainingDivergenceError("Non-finite Q-learning target", {"updates": policy.updates})
    q, cache = mlp_forward_cached(policy.q, z)
    rows = np.arange(n)
    err = q[rows, actions] - targets
    upstream = np.zeros_like(q)
    upstream[rows, actions] = 2.0 * err / n
    grads, _ = mlp_backward(policy.q, None, upstream, cache=cache)
    return float(np.mean(err * err)), grads


def q_learning_step(policy: PolicyModel, z, actions, rewards, z_next, dones, adam: AdamState
                    ) -> Tuple[PolicyModel, AdamState, float]:
    """One Adam step on the TD loss; target re-synced every `sync_period` updates"""
    loss, grads = q_loss_and_grads(policy, z, actions, rewards, z_next, dones)
    params, adam = adam_step(policy.q, grads, adam)
    policy = replace(policy, q=params, updates=policy.updates + 1)
    if policy.updates % policy.sync_period == 0:
        policy = replace(policy, target=policy.q.copy())
    return policy, adam, loss


def imitation_rewards(d: Discriminator, wae: WaeModel, task: ImitationTask, states, actions) -> np.ndarray:
    """r = log D(phi(s), a) - log(1 - D(phi(s), a)) for a batch of pairs"""
    z = encode(wae, np.atleast_2d(states))
    return np.atleast_1d(reward(d, z, encode_actions(task, actions)))


def policy_update(policy: PolicyModel, batch: TransitionBatch, d: Discriminator, wae: WaeModel,
                  task: ImitationTask, adam: AdamState) -> Tuple[PolicyModel, AdamState, float]:
    """Q-learning step on a buffer batch with rewards recomputed from the current discriminator"""
    rewards = imitation_rewards(d, wae, task, batch.states, batch.actions)
    z, z_next = encode(wae, batch.states), encode(wae, batch.next_states)
    return q_learning_step(policy, z, batch.actions, rewards, z_next, batch.dones, adam)


def greedy_rollout(policy: PolicyModel, wae: WaeModel, task: ImitationTask, start: Any) -> float:
    """Undiscounted environment return of the greedy policy from one start state"""
    state, total = start, 0.0
    for _ in range(task.max_episode_steps):
        z = encode(wae, task.observe(state))
        action = int(np.argmax(q_values(policy, z)))
        state, r, done = task.simulate(state, action)
        total += r
        if done:
            break
    return total


def evaluate_greedy(policy: PolicyModel, wae: WaeModel, task: ImitationTask, starts: Sequence[Any]) -> float:
    """Mean greedy return over fixed evaluation starts"""
    if not starts:
        raise ValueError("evaluate_greedy needs at least one start state")
    return float(np.mean([greedy_rollout(policy, wae, task, s) for s in starts]))
