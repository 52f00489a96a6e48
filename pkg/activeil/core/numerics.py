"""
Numerics - Minimal multilayer perceptron with explicit backprop, Adam and a gradient checker

=== CONTENTS ===
1. MlpSpec / MlpParams: layer layout and parameters
2. mlp_forward / mlp_forward_cached / mlp_backward: batched forward and exact backward pass
3. AdamState / adam_step: functional Adam optimizer
4. finite_diff_check: central-difference oracle for analytic gradients

=== CONVENTIONS ===
- Batches are 2D arrays (batch, features); a 1D input is a batch of one
- Weights are stored (fan_in, fan_out), a layer computes x @ W + b
- Sigmoid outputs are clamped to [SIGMOID_CLIP, 1 - SIGMOID_CLIP]
- Everything is float64
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from activeil.core.exceptions import ShapeError, TrainingDivergenceError

SIGMOID_CLIP = 1e-7

HiddenActivation = Literal["tanh", "relu"]
OutputActivation = Literal["identity", "sigmoid"]


# ============================================================
# SPEC & PARAMS
# ============================================================

@dataclass(frozen=True)
class MlpSpec:
    """Layer sizes (input, hidden..., output) and activations"""
    layer_sizes: Tuple[int, ...]
    hidden_activation: HiddenActivation = "tanh"
    output_activation: OutputActivation = "identity"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ShapeError("MlpSpec needs at least an input and an output size", {"layer_sizes": sizes})
        if any(s < 1 for s in sizes):
            raise ShapeError("All layer sizes must be >= 1", {"layer_sizes": sizes})
        if self.hidden_activation not in ("tanh", "relu"):
            raise ValueError(f"Unknown hidden activation: {self.hidden_activation}")
        if self.output_activation not in ("identity", "sigmoid"):
            raise ValueError(f"Unknown output activation: {self.output_activation}")

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    def to_dict(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "hidden_activation": self.hidden_activation,
            "output_activation": self.output_activation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MlpSpec":
        return cls(tuple(data["layer_sizes"]), data["hidden_activation"], data["output_activation"])


@dataclass
class MlpParams:
    """Per-layer weight matrices and bias vectors of one MLP"""
    spec: MlpSpec
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != self.spec.n_layers or len(self.biases) != self.spec.n_layers:
            raise ShapeError("Parameter count does not match spec", {"layers": self.spec.n_layers})
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            fan_in, fan_out = self.spec.layer_sizes[i], self.spec.layer_sizes[i + 1]
            if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
                raise ShapeError(
                    "Layer parameter shape mismatch",
                    {"layer": i, "weight": w.shape, "bias": b.shape, "expected": (fan_in, fan_out)},
                )

    def arrays(self) -> List[np.ndarray]:
        """Interleaved [W0, b0, W1, b1, ...] (views, not copies)"""
        out: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @classmethod
    def from_arrays(cls, spec: MlpSpec, arrays: Sequence[np.ndarray]) -> "MlpParams":
        arrays = list(arrays)
        return cls(spec, [np.asarray(a, dtype=float) for a in arrays[0::2]],
                   [np.asarray(a, dtype=float) for a in arrays[1::2]])

    def copy(self) -> "MlpParams":
        return MlpParams.from_arrays(self.spec, [a.copy() for a in self.arrays()])

    def zeros_like(self) -> "MlpParams":
        return MlpParams.from_arrays(self.spec, [np.zeros_like(a) for a in self.arrays()])

    def allclose(self, other: "MlpParams", atol: float = 0.0) -> bool:
        return self.spec == other.spec and all(
            np.allclose(a, b, rtol=0.0, atol=atol) for a, b in zip(self.arrays(), other.arrays())
        )


def init_params(spec: MlpSpec, rng: np.random.Generator) -> MlpParams:
    """Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases"""
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(spec, weights, biases)


def identity_params(dim: int) -> MlpParams:
    """Single linear layer computing y = x"""
    spec = MlpSpec((dim, dim), output_activation="identity")
    return MlpParams(spec, [np.eye(dim)], [np.zeros(dim)])


# ============================================================
# FORWARD / BACKWARD
# ============================================================

@dataclass
class ForwardCache:
    """Activations retained by mlp_forward_cached for mlp_backward"""
    layer_inputs: List[np.ndarray] = field(default_factory=list)
    pre_activations: List[np.ndarray] = field(default_factory=list)
    output: Optional[np.ndarray] = None
    squeeze: bool = False


def _as_batch(params: MlpParams, x) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    batch = x[None, :] if squeeze else x
    if batch.ndim != 2 or batch.shape[1] != params.spec.input_size:
        raise ShapeError(
            "Input shape does not match first layer size",
            {"got": tuple(x.shape), "expected_features": params.spec.input_size},
        )
    return batch, squeeze


def _hidden(kind: str, a: np.ndarray) -> np.ndarray:
    return np.tanh(a) if kind == "tanh" else np.maximum(a, 0.0)


def _hidden_grad(kind: str, a: np.ndarray, h: np.ndarray) -> np.ndarray:
    return 1.0 - h * h if kind == "tanh" else (a > 0.0).astype(float)


def mlp_forward_cached(params: MlpParams, x) -> Tuple[np.ndarray, ForwardCache]:
    batch, squeeze = _as_batch(params, x)
    spec = params.spec
    cache = ForwardCache(squeeze=squeeze)
    h = batch
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        cache.layer_inputs.append(h)
        a = h @ w + b
        cache.pre_activations.append(a)
        if i < spec.n_layers - 1:
            h = _hidden(spec.hidden_activation, a)
        elif spec.output_activation == "sigmoid":
            h = np.clip(expit(a), SIGMOID_CLIP, 1.0 - SIGMOID_CLIP)
        else:
            h = a
    cache.output = h
    return (h[0] if squeeze else h), cache


def mlp_forward(params: MlpParams, x) -> np.ndarray:
    """Pure forward pass; output length = last layer size"""
    return mlp_forward_cached(params, x)[0]


def mlp_backward(
    params: MlpParams,
    x,
    upstream,
    cache: Optional[ForwardCache] = None,
) -> Tuple[MlpParams, np.ndarray]:
    """
    Exact gradients of a loss through the network

    Args:
        params: network parameters
        x: input batch (ignored when `cache` is given)
        upstream: dLoss/dOutput, same shape as the forward output
        cache: activations from mlp_forward_cached on the same params

    Returns:
        (parameter gradients, gradient with respect to the input)
    """
    if cache is None:
        _, cache = mlp_forward_cached(params, x)
    spec = params.spec
    g = np.asarray(upstream, dtype=float)
    if cache.squeeze and g.ndim == 1:
        g = g[None, :]
    if g.shape != cache.output.shape:
        raise ShapeError("Upstream gradient shape mismatch", {"got": g.shape, "expected": cache.output.shape})

    a_last = cache.pre_activations[-1]
    if spec.output_activation == "sigmoid":
        s = expit(a_last)
        inside = (s > SIGMOID_CLIP) & (s < 1.0 - SIGMOID_CLIP)
        delta = g * s * (1.0 - s) * inside
    else:
        delta = g

    grad_w: List[np.ndarray] = [None] * spec.n_layers
    grad_b: List[np.ndarray] = [None] * spec.n_layers
    for i in range(spec.n_layers - 1, -1, -1):
        grad_w[i] = cache.layer_inputs[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        d_input = delta @ params.weights[i].T
        if i > 0:
            delta = d_input * _hidden_grad(spec.hidden_activation, cache.pre_activations[i - 1], cache.layer_inputs[i])
    input_grad = d_input[0] if cache.squeeze else d_input
    return MlpParams(spec, grad_w, grad_b), input_grad


# ============================================================
# ADAM
# ============================================================

@dataclass
class AdamState:
    """First/second moment accumulators aligned with MlpParams.arrays()"""
    m: List[np.ndarray]
    v: List[np.ndarray]
    step: int = 0
    lr: float = 1e-3
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8

    @classmethod
    def fresh(cls, params: MlpParams, lr: float = 1e-3, betas: Tuple[float, float] = (0.9, 0.999),
              eps: float = 1e-8) -> "AdamState":
        zeros = [np.zeros_like(a) for a in params.arrays()]
        return cls([z.copy() for z in zeros], zeros, 0, float(lr), tuple(betas), float(eps))

    def copy(self) -> "AdamState":
        return AdamState([a.copy() for a in self.m], [a.copy() for a in self.v], self.step, self.lr, self.betas, self.eps)


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState) -> Tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update; returns new params and state, inputs untouched"""
    p_arrays, g_arrays = params.arrays(), grads.arrays()
    if len(p_arrays) != len(g_arrays) or len(p_arrays) != len(state.m):
        raise ShapeError("Gradient / optimizer state does not match parameters")
    for p, g in zip(p_arrays, g_arrays):
        if p.shape != g.shape:
            raise ShapeError("Gradient shape mismatch", {"param": p.shape, "grad": g.shape})
        if not np.all(np.isfinite(g)):
            raise TrainingDivergenceError("Non-finite gradient in adam_step", {"step": state.step})

    b1, b2 = state.betas
    t = state.step + 1
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(p_arrays, g_arrays, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        new_p.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return (
        MlpParams.from_arrays(params.spec, new_p),
        AdamState(new_m, new_v, t, state.lr, state.betas, state.eps),
    )


# ============================================================
# GRADIENT CHECK
# ============================================================

LossAndGrads = Callable[[], Tuple[float, Sequence[np.ndarray]]]


def finite_diff_check(loss_fn: LossAndGrads, params: Sequence[np.ndarray], h: float = 1e-5,
                      floor: float = 1e-8) -> float:
    """
    Worst relative error between analytic and central-difference gradients

    `loss_fn` closes over the arrays in `params` (perturbed in place and
    restored) and returns (loss, analytic gradients aligned with params).
    Relative error uses the denominator max(|analytic|, |numeric|, floor).
    """
    if h <= 0:
        raise ValueError("h must be positive")
    _, analytic = loss_fn()
    analytic = [np.array(a, dtype=float, copy=True) for a in analytic]
    if len(analytic) != len(params):
        raise ShapeError("loss_fn returned a gradient list of the wrong length")

    worst = 0.0
    for p, a in zip(params, analytic):
        if p.shape != a.shape:
            raise ShapeError("Analytic gradient shape mismatch", {"param": p.shape, "grad": a.shape})
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + h
            loss_plus, _ = loss_fn()
            p[idx] = orig - h
            loss_minus, _ = loss_fn()
            p[idx] = orig
            numeric = (loss_plus - loss_minus) / (2.0 * h)
            denom = max(abs(a[idx]), abs(numeric), floor)
            worst = max(worst, abs(a[idx] - numeric) / denom)
    return float(worst)
