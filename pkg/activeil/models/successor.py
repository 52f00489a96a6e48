"""
Successor - Successor representation over WAE latents

=== DEEP SR ===
psi: latent -> latent, trained by TD against a periodically synced target psi':
    loss = mean_i || psi(z_i) - (z_i + gamma * (1 - done_i) * psi'(z'_i)) ||^2
with z = phi(s), z' = phi(s'). The encoder is never updated by this loss.

=== TABULAR SR ===
Closed form M = (I - gamma P)^-1 and the TD(0) estimate used to validate
the deep version on small chains.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence, Tuple

import numpy as np
import scipy.linalg

from activeil.core.exceptions import ShapeError, TrainingDivergenceError
from activeil.core.numerics import (
    AdamState, MlpParams, MlpSpec, adam_step, init_params, mlp_backward, mlp_forward, mlp_forward_cached,
)
from activeil.models.representation import WaeModel, encode


# ============================================================
# DEEP SR
# ============================================================

@dataclass
class SrModel:
    psi: MlpParams
    target: MlpParams
    gamma: float = 0.95
    sync_period: int = 500
    updates: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("SR discount must lie in [0, 1)")
        if self.psi.spec != self.target.spec:
            raise ShapeError("SR and target networks differ in shape")
        if self.psi.spec.input_size != self.psi.spec.output_size:
            raise ShapeError("SR network must map the latent space onto itself")

    @property
    def latent_dim(self) -> int:
        return self.psi.spec.input_size

    @classmethod
    def create(cls, latent_dim: int, hidden: Sequence[int], rng: np.random.Generator, gamma: float = 0.95,
               sync_period: int = 500, activation: str = "tanh") -> "SrModel":
        psi = init_params(MlpSpec((latent_dim, *hidden, latent_dim), activation, "identity"), rng)
        return cls(psi, psi.copy(), gamma, sync_period)


@dataclass
class SrGrads:
    """Gradients of the TD loss; encoder entry is all zeros (stop-gradient)"""
    psi: MlpParams
    encoder: MlpParams


def sr_forward(m: SrModel, z) -> np.ndarray:
    return mlp_forward(m.psi, z)


def sync_target(m: SrModel) -> SrModel:
    """psi' <- psi (exact copy)"""
    return replace(m, target=m.psi.copy())


def _td_targets(m: SrModel, z: np.ndarray, z_next: np.ndarray, dones: np.ndarray) -> np.ndarray:
    bootstrap = mlp_forward(m.target, z_next)
    targets = z + m.gamma * (1.0 - dones)[:, None] * bootstrap
    if not np.all(np.isfinite(targets)):
        raise TrainingDivergenceError("Non-finite SR TD target", {"updates": m.updates})
    return targets


def _as_batch(states, next_states, dones) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    states = np.atleast_2d(np.asarray(states, dtype=float))
    next_states = np.atleast_2d(np.asarray(next_states, dtype=float))
    dones = np.zeros(len(states)) if dones is None else np.asarray(dones, dtype=float).reshape(-1)
    if not len(states) == len(next_states) == len(dones):
        raise ShapeError("SR batch arrays differ in length",
                         {"s": len(states), "s_next": len(next_states), "done": len(dones)})
    return states, next_states, dones


def sr_td_loss_and_grads(m: SrModel, wae: WaeModel, states, next_states, dones=None) -> Tuple[float, SrGrads]:
    states, next_states, dones = _as_batch(states, next_states, dones)
    z, z_next = encode(wae, states), encode(wae, next_states)
    targets = _td_targets(m, z, z_next, dones)
    pred, cache = mlp_forward_cached(m.psi, z)
    err = pred - targets
    loss = float(np.mean(np.sum(err * err, axis=1)))
    grads, _ = mlp_backward(m.psi, None, 2.0 * err / len(z), cache=cache)
    return loss, SrGrads(grads, wae.encoder.zeros_like())


def sr_td_loss(m: SrModel, wae: WaeModel, states, next_states, dones=None) -> float:
    """Mean squared TD error of psi against z + gamma * psi'(z')"""
    return sr_td_loss_and_grads(m, wae, states, next_states, dones)[0]


def sr_train_step(m: SrModel, wae: WaeModel, states, next_states, dones, adam: AdamState
                  ) -> Tuple[SrModel, AdamState, float]:
    """One Adam step on psi; the target is re-synced every `sync_period` updates"""
    loss, grads = sr_td_loss_and_grads(m, wae, states, next_states, dones)
    if not np.isfinite(loss):
        raise TrainingDivergenceError("SR loss is not finite", {"updates": m.updates})
    psi, adam = adam_step(m.psi, grads.psi, adam)
    m = replace(m, psi=psi, updates=m.updates + 1)
    if m.updates % m.sync_period == 0:
        m = sync_target(m)
    return m, adam, loss


def sr_vectors(m: SrModel, wae: WaeModel, states) -> np.ndarray:
    """psi(phi(s)) for a batch of observations"""
    return sr_forward(m, encode(wae, np.atleast_2d(states)))


# ============================================================
# TABULAR SR
# ============================================================

@dataclass
class TabularSr:
    matrix: np.ndarray
    gamma: float

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def tabular_sr_solve(P, gamma: float) -> TabularSr:
    """
    Exact SR of a Markov chain: M = (I - gamma P)^-1

    P may be substochastic (rows summing to less than one) so chains with
    terminal states are accepted; a terminal row of zeros gives M[s] = 1_s.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ShapeError("Transition matrix must be square", {"shape": P.shape})
    if np.any(P < 0) or np.any(P.sum(axis=1) > 1.0 + 1e-9):
        raise ValueError("Transition matrix rows must be non-negative and sum to at most 1")
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    eye = np.eye(P.shape[0])
    return TabularSr(scipy.linalg.solve(eye - gamma * P, eye), gamma)


def tabular_sr_td(
    episodes: Iterable[Sequence[int]],
    n_states: int,
    gamma: float,
    alpha: float,
    sweeps: int = 1,
    decay: float = 0.0,
    terminal_last: bool = False,
) -> TabularSr:
    """
    TD(0) estimate of the SR from state-index sequences

    Every consecutive pair (s, s') applies
        M[s] += a_k * (1_s + gamma * M[s'] - M[s])
    with a_k = alpha / (1 + decay * k) in sweep k. With terminal_last the
    final state of each episode is also updated towards 1_s.
    """
    episodes = [list(map(int, ep)) for ep in episodes]
    for ep in episodes:
        if any(not 0 <= s < n_states for s in ep):
            raise ShapeError("State index out of range", {"n_states": n_states})
    M = np.zeros((n_states, n_states))
    eye = np.eye(n_states)
    for sweep in range(sweeps):
        rate = alpha / (1.0 + decay * sweep)
        for ep in episodes:
            for s, s_next in zip(ep[:-1], ep[1:]):
                M[s] += rate * (eye[s] + gamma * M[s_next] - M[s])
            if terminal_last and ep:
                last = ep[-1]
                M[last] += rate * (eye[last] - M[last])
    return TabularSr(M, gamma)


def policy_chain(maze, policy_fn: Callable[[Tuple[int, int]], int]) -> np.ndarray:
    """
    Transition matrix over maze cell indices under a deterministic policy

    Wall cells and the goal get empty rows and a move into the goal ends the
    episode without a successor, so the result is substochastic.
    """
    spec = maze.maze
    P = np.zeros((spec.n_cells, spec.n_cells))
    for cell in spec.start_cells():
        nxt, _, done = maze.simulate(cell, policy_fn(cell))
        if not done:
            P[spec.index(cell), spec.index(nxt)] = 1.0
    return P
