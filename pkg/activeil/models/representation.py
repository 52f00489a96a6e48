"""
Representation - Deterministic-encoder Wasserstein autoencoder

=== LOSSES ===
- wae_loss:        mean_i ||s_i - G(phi(s_i))||_2  +  beta1 * MMD^2(phi(D_S), D_Z)
- adversarial_reg: MMD^2(phi(D_S^P), phi(D_S^E))

MMD^2 is the biased V-statistic, mean k(X,X) + mean k(Y,Y) - 2 mean k(X,Y),
so it is never negative. With the median-heuristic bandwidth the bandwidth
is fixed on the batch first (KernelSpec.resolve) and treated as a constant
by the gradients.

The reconstruction term sums over D_S only; actions never enter the WAE loss.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist, pdist

from activeil.core.exceptions import ShapeError
from activeil.core.numerics import MlpParams, MlpSpec, init_params, mlp_backward, mlp_forward, mlp_forward_cached


# ============================================================
# KERNELS & MMD
# ============================================================

@dataclass(frozen=True)
class KernelSpec:
    """RBF or rational-quadratic kernel; bandwidth None means median heuristic"""
    kind: Literal["rbf", "rq"] = "rbf"
    bandwidth: Optional[float] = None
    rq_alphas: Tuple[float, ...] = (0.2, 0.5, 1.0, 2.0, 5.0)

    def __post_init__(self):
        if self.kind not in ("rbf", "rq"):
            raise ValueError(f"Unknown kernel: {self.kind}")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError("Kernel bandwidth must be positive")
        if self.kind == "rq" and (not self.rq_alphas or min(self.rq_alphas) <= 0):
            raise ValueError("RQ scale mixture parameters must be positive")

    def resolve(self, X: np.ndarray, Y: Optional[np.ndarray] = None) -> "KernelSpec":
        """Fix the bandwidth: median pairwise distance of the combined batch"""
        if self.bandwidth is not None:
            return self
        points = X if Y is None else np.vstack([X, Y])
        dists = pdist(points) if len(points) > 1 else np.zeros(0)
        median = float(np.median(dists)) if dists.size else 0.0
        return replace(self, bandwidth=median if np.isfinite(median) and median > 0 else 1.0)


def _kernel_and_slope(X: np.ndarray, Y: np.ndarray, kernel: KernelSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Kernel matrix and its derivative with respect to the squared distance"""
    sq = cdist(X, Y, "sqeuclidean")
    two_s2 = 2.0 * kernel.bandwidth ** 2
    if kernel.kind == "rbf":
        k = np.exp(-sq / two_s2)
        return k, -k / two_s2
    k = np.zeros_like(sq)
    slope = np.zeros_like(sq)
    for alpha in kernel.rq_alphas:
        base = 1.0 + sq / (alpha * two_s2)
        k += base ** (-alpha)
        slope -= base ** (-alpha - 1.0) / two_s2
    n = len(kernel.rq_alphas)
    return k / n, slope / n


def kernel_matrix(X: np.ndarray, Y: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    X, Y = np.atleast_2d(X), np.atleast_2d(Y)
    return _kernel_and_slope(X, Y, kernel.resolve(X, Y))[0]


def _check_pair(X: np.ndarray, Y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    X, Y = np.atleast_2d(np.asarray(X, dtype=float)), np.atleast_2d(np.asarray(Y, dtype=float))
    if len(X) != len(Y) or len(X) < 2:
        raise ShapeError("MMD needs two sample sets of the same size >= 2", {"x": len(X), "y": len(Y)})
    if X.shape[1] != Y.shape[1]:
        raise ShapeError("MMD sample sets differ in dimension", {"x": X.shape, "y": Y.shape})
    return X, Y


def _pair_grad(A: np.ndarray, B: np.ndarray, slope: np.ndarray) -> np.ndarray:
    # sum_b slope[a, b] * (A[a] - B[b])
    return A * slope.sum(axis=1, keepdims=True) - slope @ B


def mmd_with_grad(X, Y, kernel: KernelSpec) -> Tuple[float, np.ndarray, np.ndarray]:
    """Biased MMD^2 and its gradients with respect to every sample of X and Y"""
    X, Y = _check_pair(X, Y)
    kernel = kernel.resolve(X, Y)
    n, m = len(X), len(Y)
    kxx, sxx = _kernel_and_slope(X, X, kernel)
    kyy, syy = _kernel_and_slope(Y, Y, kernel)
    kxy, sxy = _kernel_and_slope(X, Y, kernel)
    value = kxx.sum() / n ** 2 + kyy.sum() / m ** 2 - 2.0 * kxy.sum() / (n * m)
    grad_x = 4.0 / n ** 2 * _pair_grad(X, X, sxx) - 4.0 / (n * m) * _pair_grad(X, Y, sxy)
    grad_y = 4.0 / m ** 2 * _pair_grad(Y, Y, syy) - 4.0 / (n * m) * _pair_grad(Y, X, sxy.T)
    return float(value), grad_x, grad_y


def mmd(X, Y, kernel: KernelSpec) -> float:
    """Biased empirical MMD^2 between equal-size sample sets; symmetric and >= 0"""
    X, Y = _check_pair(X, Y)
    # canonical argument order keeps mmd(X, Y) == mmd(Y, X) bit for bit
    if X.tobytes() > Y.tobytes():
        X, Y = Y, X
    value, _, _ = mmd_with_grad(X, Y, kernel)
    return max(value, 0.0)


# ============================================================
# WAE MODEL
# ============================================================

@dataclass
class WaeModel:
    """Encoder phi, decoder G, standard normal prior and MMD kernel"""
    encoder: MlpParams
    decoder: MlpParams
    kernel: KernelSpec = field(default_factory=KernelSpec)
    beta1: float = 1.0

    def __post_init__(self):
        if self.encoder.spec.output_size != self.decoder.spec.input_size:
            raise ShapeError("Encoder output and decoder input sizes differ")
        if self.encoder.spec.input_size != self.decoder.spec.output_size:
            raise ShapeError("Encoder input and decoder output sizes differ")

    @property
    def latent_dim(self) -> int:
        return self.encoder.spec.output_size

    @property
    def obs_dim(self) -> int:
        return self.encoder.spec.input_size

    @classmethod
    def create(
        cls,
        obs_dim: int,
        latent_dim: int,
        hidden: Sequence[int],
        rng: np.random.Generator,
        activation: str = "tanh",
        kernel: Optional[KernelSpec] = None,
        beta1: float = 1.0,
    ) -> "WaeModel":
        enc = MlpSpec((obs_dim, *hidden, latent_dim), activation, "identity")
        dec = MlpSpec((latent_dim, *reversed(tuple(hidden)), obs_dim), activation, "identity")
        return cls(init_params(enc, rng), init_params(dec, rng), kernel or KernelSpec(), beta1)

    def copy(self) -> "WaeModel":
        return WaeModel(self.encoder.copy(), self.decoder.copy(), self.kernel, self.beta1)


@dataclass
class WaeGrads:
    encoder: MlpParams
    decoder: MlpParams


def encode(model: WaeModel, s) -> np.ndarray:
    """phi(s): deterministic latent code(s)"""
    return mlp_forward(model.encoder, s)


def decode(model: WaeModel, z) -> np.ndarray:
    """G(z): reconstruction in observation space"""
    return mlp_forward(model.decoder, z)


def sample_prior(rng: np.random.Generator, n: int, latent_dim: int) -> np.ndarray:
    """n i.i.d. draws from the unit multivariate Gaussian prior"""
    return rng.standard_normal((n, latent_dim))


def wae_terms(
    model: WaeModel,
    states: np.ndarray,
    z: np.ndarray,
    prior: np.ndarray,
    kernel: Optional[KernelSpec] = None,
) -> Tuple[float, np.ndarray, MlpParams]:
    """
    WAE loss on already-encoded states

    Returns:
        (loss, dLoss/dz, decoder gradients); the caller backpropagates dz
        through whichever encoder pass produced z.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    n = len(states)
    if n < 2:
        raise ShapeError("WAE loss needs a batch of at least 2 states", {"batch": n})

    x_hat, dec_cache = mlp_forward_cached(model.decoder, z)
    residual = states - x_hat
    norms = np.linalg.norm(residual, axis=1)
    recon = float(norms.mean())
    safe = np.where(norms > 0.0, norms, 1.0)
    d_xhat = np.where(norms[:, None] > 0.0, -residual / (safe[:, None] * n), 0.0)
    dec_grads, dz = mlp_backward(model.decoder, None, d_xhat, cache=dec_cache)

    kernel = (kernel or model.kernel).resolve(z, prior)
    if model.beta1 > 0.0:
        divergence, d_latent, _ = mmd_with_grad(z, prior, kernel)
        return recon + model.beta1 * divergence, dz + model.beta1 * d_latent, dec_grads
    _check_pair(z, prior)
    return recon, dz, dec_grads


def wae_loss(model: WaeModel, states, prior: np.ndarray, kernel: Optional[KernelSpec] = None) -> float:
    """Mean reconstruction cost plus beta1 * MMD^2 between encoded batch and a prior sample"""
    z = encode(model, np.atleast_2d(states))
    loss, _, _ = wae_terms(model, states, z, prior, kernel)
    return loss


def wae_loss_and_grads(
    model: WaeModel, states, prior: np.ndarray, kernel: Optional[KernelSpec] = None
) -> Tuple[float, WaeGrads]:
    states = np.atleast_2d(np.asarray(states, dtype=float))
    z, enc_cache = mlp_forward_cached(model.encoder, states)
    loss, dz, dec_grads = wae_terms(model, states, z, prior, kernel)
    enc_grads, _ = mlp_backward(model.encoder, None, dz, cache=enc_cache)
    return loss, WaeGrads(enc_grads, dec_grads)


def adversarial_reg(
    model: WaeModel, policy_states, expert_states, kernel: Optional[KernelSpec] = None
) -> float:
    """MMD^2 between encoded policy and expert states; 0 while either pool is empty"""
    if len(policy_states) == 0 or len(expert_states) == 0:
        return 0.0
    return mmd(encode(model, np.atleast_2d(policy_states)), encode(model, np.atleast_2d(expert_states)),
               kernel or model.kernel)
