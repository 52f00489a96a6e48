"""
Adversary - Discriminator over (latent, action) pairs and the joint adversarial objective

=== OBJECTIVE (minimized over discriminator, encoder and decoder) ===
    L = sum_policy log D(phi(s), a) + sum_expert log(1 - D(phi(s), a))
        + alpha1 * L_WAE(policy states) + alpha2 * L_WAE(expert states)
        + beta * MMD^2(phi(policy states), phi(expert states))

Minimizing drives D -> 1 on expert pairs and D -> 0 on policy pairs, so the
imitation reward r = log D - log(1 - D) is large for expert-like behaviour
and a low score marks an unfamiliar (unsafe) state-action pair.

While the expert dataset is empty the expert classification term, the
alpha2 WAE term and the beta MMD term are all skipped.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from activeil.core.exceptions import ShapeError, TrainingDivergenceError
from activeil.core.numerics import (
    AdamState, MlpParams, MlpSpec, adam_step, init_params, mlp_backward, mlp_forward, mlp_forward_cached,
)
from activeil.environments.base import Action, ImitationTask
from activeil.models.representation import KernelSpec, WaeModel, mmd_with_grad, sample_prior, wae_terms


# ============================================================
# TYPES
# ============================================================

@dataclass(frozen=True)
class AdversaryHyper:
    """Objective weights; entropy_weight is consumed by the policy learner"""
    alpha1: float = 1.0
    alpha2: float = 1.0
    beta: float = 1.0
    entropy_weight: float = 0.0
    lr: float = 1e-3
    batch_size: int = 64

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "beta", "entropy_weight", "lr"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")


@dataclass
class Discriminator:
    """Sigmoid MLP over concat(z, action encoding)"""
    net: MlpParams
    latent_dim: int
    action_dim: int

    def __post_init__(self):
        if self.net.spec.input_size != self.latent_dim + self.action_dim or self.net.spec.output_size != 1:
            raise ShapeError("Discriminator net does not match latent/action sizes",
                             {"latent": self.latent_dim, "action": self.action_dim})

    @classmethod
    def create(cls, latent_dim: int, action_dim: int, hidden: Sequence[int], rng: np.random.Generator,
               activation: str = "tanh") -> "Discriminator":
        spec = MlpSpec((latent_dim + action_dim, *hidden, 1), activation, "sigmoid")
        return cls(init_params(spec, rng), latent_dim, action_dim)

    def copy(self) -> "Discriminator":
        return Discriminator(self.net.copy(), self.latent_dim, self.action_dim)


@dataclass
class PairBatch:
    """Observations with their encoded actions"""
    states: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.actions = np.atleast_2d(np.asarray(self.actions, dtype=float))
        if len(self.states) != len(self.actions):
            raise ShapeError("States and actions differ in length",
                             {"states": len(self.states), "actions": len(self.actions)})

    def __len__(self) -> int:
        return len(self.states)


@dataclass
class AdversaryLoss:
    """Breakdown of the joint objective"""
    classification: float
    wae_policy: float
    wae_expert: float
    mmd: float
    total: float

    @property
    def wae(self) -> float:
        return self.wae_policy + self.wae_expert


@dataclass
class AdversaryGrads:
    discriminator: MlpParams
    encoder: MlpParams
    decoder: MlpParams


@dataclass
class AdversaryOptim:
    """Adam states for the three jointly trained networks"""
    discriminator: AdamState
    encoder: AdamState
    decoder: AdamState

    @classmethod
    def fresh(cls, disc: Discriminator, wae: WaeModel, disc_lr: float, wae_lr: float) -> "AdversaryOptim":
        return cls(AdamState.fresh(disc.net, disc_lr), AdamState.fresh(wae.encoder, wae_lr),
                   AdamState.fresh(wae.decoder, wae_lr))


def encode_actions(task: ImitationTask, actions: Sequence[Action]) -> np.ndarray:
    """Discriminator action encodings (one-hot or scaled raw vector), one row per action"""
    if len(actions) == 0:
        return np.zeros((0, task.action_dim))
    return np.stack([task.encode_action(a) for a in actions])


# ============================================================
# SCORE & REWARD
# ============================================================

def _joint(d: Discriminator, z, a) -> np.ndarray:
    z, a = np.asarray(z, dtype=float), np.asarray(a, dtype=float)
    if z.ndim != a.ndim:
        raise ShapeError("Latent and action batches differ in rank", {"z": z.shape, "a": a.shape})
    if z.shape[-1] != d.latent_dim or a.shape[-1] != d.action_dim:
        raise ShapeError("Latent/action width mismatch",
                         {"z": z.shape, "a": a.shape, "expected": (d.latent_dim, d.action_dim)})
    return np.concatenate([z, a], axis=-1)


def score(d: Discriminator, z, a):
    """D(z, a) in [1e-7, 1 - 1e-7]; scalar for a single pair, vector for a batch"""
    out = mlp_forward(d.net, _joint(d, z, a))
    return float(out[0]) if out.ndim == 1 else out[:, 0]


def reward(d: Discriminator, z, a):
    """Imitation reward log D - log(1 - D), the logit of the clamped score"""
    s = score(d, z, a)
    return np.log(s) - np.log1p(-s)


# ============================================================
# JOINT OBJECTIVE
# ============================================================

def _has_expert(expert: Optional[PairBatch]) -> bool:
    return expert is not None and len(expert) > 0


def adversary_loss_and_grads(
    d: Discriminator,
    wae: WaeModel,
    policy: PairBatch,
    expert: Optional[PairBatch],
    hyper: AdversaryHyper,
    prior_policy: np.ndarray,
    prior_expert: Optional[np.ndarray] = None,
    kernel: Optional[KernelSpec] = None,
) -> Tuple[AdversaryLoss, AdversaryGrads]:
    """
    Joint objective and its exact gradients

    Args:
        prior_policy / prior_expert: standard-normal samples matching the batch
            sizes, consumed by the two WAE terms
        kernel: overrides the WAE model's kernel for every MMD term
    """
    if len(policy) == 0:
        raise ShapeError("Policy batch must not be empty")
    use_expert = _has_expert(expert)
    kernel = kernel or wae.kernel

    enc_grads = wae.encoder.zeros_like()
    dec_grads = wae.decoder.zeros_like()
    disc_grads = d.net.zeros_like()

    def accumulate(target: MlpParams, extra: MlpParams) -> None:
        for t, e in zip(target.arrays(), extra.arrays()):
            t += e

    # Policy half
    z_p, cache_p = mlp_forward_cached(wae.encoder, policy.states)
    d_p, dcache_p = mlp_forward_cached(d.net, _joint(d, z_p, policy.actions))
    classification = float(np.log(d_p).sum())
    g_disc, g_in = mlp_backward(d.net, None, 1.0 / d_p, cache=dcache_p)
    accumulate(disc_grads, g_disc)
    dz_p = g_in[:, : d.latent_dim].copy()

    wae_policy = 0.0
    if hyper.alpha1 > 0.0:
        wae_policy, dz, g_dec = wae_terms(wae, policy.states, z_p, prior_policy, kernel)
        dz_p += hyper.alpha1 * dz
        accumulate(dec_grads, _scaled(g_dec, hyper.alpha1))

    # Expert half
    wae_expert, divergence = 0.0, 0.0
    if use_expert:
        z_e, cache_e = mlp_forward_cached(wae.encoder, expert.states)
        d_e, dcache_e = mlp_forward_cached(d.net, _joint(d, z_e, expert.actions))
        classification += float(np.log1p(-d_e).sum())
        g_disc, g_in = mlp_backward(d.net, None, -1.0 / (1.0 - d_e), cache=dcache_e)
        accumulate(disc_grads, g_disc)
        dz_e = g_in[:, : d.latent_dim].copy()

        if hyper.alpha2 > 0.0:
            if prior_expert is None:
                raise ShapeError("Expert prior sample required when alpha2 > 0")
            wae_expert, dz, g_dec = wae_terms(wae, expert.states, z_e, prior_expert, kernel)
            dz_e += hyper.alpha2 * dz
            accumulate(dec_grads, _scaled(g_dec, hyper.alpha2))

        if hyper.beta > 0.0:
            divergence, g_p, g_e = mmd_with_grad(z_p, z_e, kernel)
            dz_p += hyper.beta * g_p
            dz_e += hyper.beta * g_e

        g_enc, _ = mlp_backward(wae.encoder, None, dz_e, cache=cache_e)
        accumulate(enc_grads, g_enc)

    g_enc, _ = mlp_backward(wae.encoder, None, dz_p, cache=cache_p)
    accumulate(enc_grads, g_enc)

    total = (classification + hyper.alpha1 * wae_policy + hyper.alpha2 * wae_expert
             + hyper.beta * divergence)
    parts = AdversaryLoss(classification, wae_policy, wae_expert, divergence, total)
    return parts, AdversaryGrads(disc_grads, enc_grads, dec_grads)


def _scaled(grads: MlpParams, factor: float) -> MlpParams:
    return MlpParams.from_arrays(grads.spec, [factor * a for a in grads.arrays()])


def adversary_loss(
    d: Discriminator,
    wae: WaeModel,
    policy: PairBatch,
    expert: Optional[PairBatch],
    hyper: AdversaryHyper,
    prior_policy: np.ndarray,
    prior_expert: Optional[np.ndarray] = None,
    kernel: Optional[KernelSpec] = None,
) -> float:
    parts, _ = adversary_loss_and_grads(d, wae, policy, expert, hyper, prior_policy, prior_expert, kernel)
    return parts.total


def adversary_train_step(
    d: Discriminator,
    wae: WaeModel,
    policy: PairBatch,
    expert: Optional[PairBatch],
    hyper: AdversaryHyper,
    optim: AdversaryOptim,
    rng: np.random.Generator,
) -> Tuple[Discriminator, WaeModel, AdversaryOptim, AdversaryLoss]:
    """
    One Adam step on the joint objective with fresh prior samples

    Returns:
        (discriminator, wae, optimizer states, loss breakdown at the old parameters)

    Raises:
        TrainingDivergenceError: loss or gradients are not finite
    """
    prior_p = sample_prior(rng, len(policy), wae.latent_dim)
    prior_e = sample_prior(rng, len(expert), wae.latent_dim) if _has_expert(expert) else None
    parts, grads = adversary_loss_and_grads(d, wae, policy, expert, hyper, prior_p, prior_e)
    if not np.isfinite(parts.total):
        raise TrainingDivergenceError("Adversarial loss is not finite", {"loss": parts.total})

    disc_net, disc_state = adam_step(d.net, grads.discriminator, optim.discriminator)
    enc, enc_state = adam_step(wae.encoder, grads.encoder, optim.encoder)
    dec, dec_state = adam_step(wae.decoder, grads.decoder, optim.decoder)
    new_d = Discriminator(disc_net, d.latent_dim, d.action_dim)
    new_wae = WaeModel(enc, dec, wae.kernel, wae.beta1)
    return new_d, new_wae, AdversaryOptim(disc_state, enc_state, dec_state), parts
