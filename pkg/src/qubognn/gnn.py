"""Two-layer GCN with a scalar per-node output and manual reverse-mode gradients.

    H1    = relu(A_hat @ E @ W1)
    a_pre = A_hat @ H1 @ W2
    a_post = activation(a_pre)

``A_hat`` is the symmetric-normalized adjacency, with or without self-loops.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graphgen import Graph


class Activation(str, enum.Enum):
    SIGMOID = "sigmoid"
    TEMPERED_SIGMOID = "tempered-sigmoid"
    STEP_STE = "step-ste"
    STEP_SIGMOID_BACKWARD = "step-sigmoid-backward"

    @property
    def is_step(self) -> bool:
        return self in (Activation.STEP_STE, Activation.STEP_SIGMOID_BACKWARD)


def sigmoid(x):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def step(x):
    return (np.asarray(x) > 0).astype(np.float64)


def clip_unit(x):
    return np.clip(x, 0.0, 1.0)


def activate(kind, a_pre, inv_temp: float = 1.0) -> np.ndarray:
    kind = Activation(kind)
    if kind is Activation.SIGMOID:
        return sigmoid(a_pre)
    if kind is Activation.TEMPERED_SIGMOID:
        return sigmoid(a_pre * inv_temp)
    return step(a_pre)


def surrogate_derivative(kind, a_pre, inv_temp: float = 1.0) -> np.ndarray:
    """Derivative used in the backward pass of the final activation."""
    kind = Activation(kind)
    a_pre = np.asarray(a_pre, dtype=np.float64)
    if kind is Activation.SIGMOID:
        s = sigmoid(a_pre)
        return s * (1.0 - s)
    if kind is Activation.TEMPERED_SIGMOID:
        s = sigmoid(a_pre * inv_temp)
        return inv_temp * s * (1.0 - s)
    if kind is Activation.STEP_STE:
        return ((a_pre > 0.0) & (a_pre < 1.0)).astype(np.float64)
    s = sigmoid(a_pre)
    return s * (1.0 - s)


def surrogate_forward(kind, a_pre, inv_temp: float = 1.0) -> np.ndarray:
    """Smooth function whose derivative the backward pass uses."""
    kind = Activation(kind)
    if kind is Activation.STEP_STE:
        return clip_unit(a_pre)
    if kind is Activation.STEP_SIGMOID_BACKWARD:
        return sigmoid(a_pre)
    return activate(kind, a_pre, inv_temp)


def normalized_adjacency(g: Graph, self_loops: bool = True) -> np.ndarray:
    """``D^-1/2 (A + I) D^-1/2`` with ``D`` the degree matrix of ``A + I``.

    With ``self_loops=False`` the identity is dropped (isolated nodes then
    get an all-zero row).
    """
    a = g.adjacency()
    if self_loops:
        a += np.eye(g.n)
    deg = a.sum(axis=1)
    dinv = np.divide(1.0, np.sqrt(deg), out=np.zeros_like(deg), where=deg > 0)
    return dinv[:, None] * a * dinv[None, :]


def default_dims(n: int) -> tuple[int, int]:
    d0 = max(1, math.isqrt(n))
    return d0, max(1, d0 // 2)


@dataclass
class Model:
    embeddings: np.ndarray
    W1: np.ndarray
    W2: np.ndarray
    activation: Activation = Activation.SIGMOID
    b1: np.ndarray | None = None
    b2: np.ndarray | None = None

    theta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.activation = Activation(self.activation)
        n, d0 = np.shape(self.embeddings)
        if np.shape(self.W1)[0] != d0 or np.shape(self.W2) != (np.shape(self.W1)[1], 1):
            raise ValueError(
                f"dimension mismatch: E{np.shape(self.embeddings)} W1{np.shape(self.W1)} "
                f"W2{np.shape(self.W2)}"
            )
        # all parameters live in one flat buffer so the optimizer touches a single array
        arrays = [np.asarray(getattr(self, k), dtype=np.float64) for k in self.param_names]
        self.theta = np.concatenate([a.ravel() for a in arrays])
        offset = 0
        for k, a in zip(self.param_names, arrays):
            setattr(self, k, self.theta[offset:offset + a.size].reshape(a.shape))
            offset += a.size

    @property
    def param_names(self) -> list[str]:
        names = ["embeddings", "W1", "W2"]
        if self.b1 is not None:
            names += ["b1", "b2"]
        return names

    def params(self) -> list[np.ndarray]:
        return [getattr(self, k) for k in self.param_names]

    def flat_grad(self, grads) -> np.ndarray:
        return np.concatenate([g.ravel() for g in grads])

    def copy(self) -> "Model":
        return Model(
            self.embeddings.copy(), self.W1.copy(), self.W2.copy(), self.activation,
            None if self.b1 is None else self.b1.copy(),
            None if self.b2 is None else self.b2.copy(),
        )

    def save(self, path) -> None:
        arrays = {k: getattr(self, k) for k in self.param_names}
        np.savez(path, activation=np.array(self.activation.value), **arrays)

    @classmethod
    def load(cls, path) -> "Model":
        with np.load(Path(path), allow_pickle=False) as z:
            return cls(
                z["embeddings"], z["W1"], z["W2"], Activation(str(z["activation"])),
                z["b1"] if "b1" in z else None, z["b2"] if "b2" in z else None,
            )


def _glorot(rng, fan_in, fan_out):
    lim = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


def init_model(n: int, seed=None, activation=Activation.SIGMOID, d0: int | None = None,
               d1: int | None = None, bias: bool = False, embed_scale: float = 1.0) -> Model:
    """Random model for an ``n``-node graph.

    Embeddings are uniform on ``[-embed_scale, embed_scale]``, weights
    Glorot-uniform, biases zero.
    """
    if n < 1:
        raise ValueError("n must be positive")
    d0 = d0 or default_dims(n)[0]
    d1 = d1 or max(1, d0 // 2)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    emb = rng.uniform(-embed_scale, embed_scale, size=(n, d0))
    W1 = _glorot(rng, d0, d1)
    W2 = _glorot(rng, d1, 1)
    b1 = np.zeros(d1) if bias else None
    b2 = np.zeros(1) if bias else None
    return Model(emb, W1, W2, activation, b1, b2)


@dataclass
class Cache:
    A_hat: np.ndarray
    AE: np.ndarray
    Z1: np.ndarray
    AH: np.ndarray
    a_pre: np.ndarray
    inv_temp: float
    model: Model = field(repr=False)


def forward(model: Model, A_hat: np.ndarray, inv_temp: float = 1.0):
    """Return ``(a_pre, a_post, cache)``."""
    if inv_temp < 1:
        raise ValueError("inverse temperature must be >= 1")
    if A_hat.shape != (model.embeddings.shape[0],) * 2:
        raise ValueError(
            f"dimension mismatch: A_hat {A_hat.shape} vs {model.embeddings.shape[0]} nodes"
        )
    AE = A_hat @ model.embeddings
    Z1 = AE @ model.W1
    if model.b1 is not None:
        Z1 = Z1 + model.b1
    H1 = np.maximum(Z1, 0.0)
    AH = A_hat @ H1
    a_pre = (AH @ model.W2).ravel()
    if model.b2 is not None:
        a_pre = a_pre + model.b2[0]
    a_post = activate(model.activation, a_pre, inv_temp)
    return a_pre, a_post, Cache(A_hat, AE, Z1, AH, a_pre, inv_temp, model)


def backward(cache: Cache, dL_dpost) -> list[np.ndarray]:
    """Gradients in ``model.param_names`` order."""
    m = cache.model
    g_pre = np.asarray(dL_dpost, dtype=np.float64) * surrogate_derivative(
        m.activation, cache.a_pre, cache.inv_temp
    )
    g_pre = g_pre[:, None]
    gW2 = cache.AH.T @ g_pre
    g_H1 = cache.A_hat.T @ (g_pre @ m.W2.T)
    g_Z1 = g_H1 * (cache.Z1 > 0.0)
    gW1 = cache.AE.T @ g_Z1
    gE = cache.A_hat.T @ (g_Z1 @ m.W1.T)
    grads = [gE, gW1, gW2]
    if m.b1 is not None:
        grads += [g_Z1.sum(axis=0), g_pre.sum(axis=0)]
    return grads


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **kw) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kw)


def adam_step(params, grads, state: AdamState, lr: float, step_index: int | None = None):
    """Bias-corrected Adam update, applied to ``params`` in place.

    ``step_index`` is the 1-based step count; defaults to ``state.t + 1``.
    """
    t = state.t + 1 if step_index is None else step_index
    state.t = t
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= (lr / bc1) * m / (np.sqrt(v / bc2) + state.eps)
    return params, state
