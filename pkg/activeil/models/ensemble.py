"""
Bootstrapped Q ensemble used by the uncertainty query baseline

Each head is an independent Q-learner over the latent space with its own
optimizer, trained only on the buffer entries whose bootstrap mask selects
it. Uncertainty of a pair is the standard deviation of Q(z, a) across heads.
"""
from __future__ import annotations

from typing import List, Sequence

import numpy as np

from activeil.core.numerics import AdamState
from activeil.models.policy import PolicyModel, q_learning_step, q_values


class BootstrapEnsemble:
    """K Q-heads trained on Bernoulli(p) bootstrap masks"""

    def __init__(self, heads: List[PolicyModel], optims: List[AdamState], bootstrap_p: float = 0.5):
        if len(heads) < 2:
            raise ValueError("An ensemble needs at least 2 heads")
        if len(optims) != len(heads):
            raise ValueError("One optimizer state per head is required")
        self.heads = heads
        self.optims = optims
        self.bootstrap_p = bootstrap_p

    @classmethod
    def create(cls, latent_dim: int, n_actions: int, hidden: Sequence[int], n_heads: int,
               rng: np.random.Generator, lr: float = 1e-3, bootstrap_p: float = 0.5,
               gamma: float = 0.95, sync_period: int = 200, activation: str = "tanh") -> "BootstrapEnsemble":
        heads = [
            PolicyModel.create(latent_dim, n_actions, hidden, rng, activation, gamma=gamma, sync_period=sync_period)
            for _ in range(n_heads)
        ]
        return cls(heads, [AdamState.fresh(h.q, lr) for h in heads], bootstrap_p)

    @property
    def n_heads(self) -> int:
        return len(self.heads)

    def sample_mask(self, rng: np.random.Generator) -> np.ndarray:
        return rng.random(self.n_heads) < self.bootstrap_p

    def update(self, z: np.ndarray, actions, rewards: np.ndarray, z_next: np.ndarray, dones: np.ndarray,
               masks: np.ndarray) -> float:
        """One step per head on its masked rows; returns the mean loss of the heads that trained"""
        actions = np.asarray(actions, dtype=int)
        losses = []
        for k, head in enumerate(self.heads):
            rows = np.flatnonzero(masks[:, k])
            if rows.size == 0:
                continue
            self.heads[k], self.optims[k], loss = q_learning_step(
                head, z[rows], actions[rows], rewards[rows], z_next[rows], dones[rows], self.optims[k]
            )
            losses.append(loss)
        return float(np.mean(losses)) if losses else float("nan")

    def q_taken(self, z: np.ndarray, actions) -> np.ndarray:
        """(n_heads, batch) matrix of Q(z, a_taken)"""
        actions = np.asarray(actions, dtype=int)
        rows = np.arange(len(actions))
        return np.stack([q_values(h, np.atleast_2d(z))[rows, actions] for h in self.heads])

    def uncertainty(self, z: np.ndarray, actions) -> np.ndarray:
        return self.q_taken(z, actions).std(axis=0)
