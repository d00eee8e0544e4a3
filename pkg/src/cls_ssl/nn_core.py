"""Small ReLU multilayer perceptron with hand-written gradients.

Parameters are kept as plain lists of float64 arrays so they can be copied,
compared and flattened cheaply.  Weight matrices have shape ``(out, in)``
and the last layer feeds a softmax.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericError, ShapeError

PROB_FLOOR = 1e-12


@dataclass
class NetworkParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("need one bias per weight matrix and at least one layer")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ShapeError(f"layer {k}: weight {W.shape} and bias {b.shape} disagree")
            if k and W.shape[1] != self.weights[k - 1].shape[0]:
                raise ShapeError(f"layer {k} expects {W.shape[1]} inputs, previous layer gives "
                                 f"{self.weights[k - 1].shape[0]}")

    @property
    def arch(self) -> list[int]:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[0]

    def arrays(self) -> list[np.ndarray]:
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    def copy(self) -> "NetworkParams":
        return NetworkParams([W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def zeros_like(self) -> "NetworkParams":
        return NetworkParams([np.zeros_like(W) for W in self.weights],
                             [np.zeros_like(b) for b in self.biases])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())

    def same_shape(self, other: "NetworkParams") -> bool:
        return [a.shape for a in self.arrays()] == [a.shape for a in other.arrays()]


def param_distance(a: NetworkParams, b: NetworkParams) -> float:
    """Euclidean distance between two parameter sets, flattened."""
    if not a.same_shape(b):
        raise ShapeError("parameter sets have different shapes")
    return float(np.linalg.norm(a.flat() - b.flat()))


def init_network(arch, seed) -> NetworkParams:
    """He-initialised weights (std ``sqrt(2 / fan_in)``) and zero biases."""
    arch = list(arch)
    if len(arch) < 2:
        raise ConfigurationError(f"architecture needs at least input and output sizes, got {arch}")
    if any(int(n) != n or n < 1 for n in arch):
        raise ConfigurationError(f"layer sizes must be positive integers, got {arch}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(arch[:-1], arch[1:]):
        weights.append(rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights, biases)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class ForwardCache:
    params: NetworkParams
    # inputs to each layer; activations[0] is the batch itself
    activations: list[np.ndarray] = field(default_factory=list)
    logits: np.ndarray | None = None


def forward_cached(params: NetworkParams, x) -> tuple[np.ndarray, ForwardCache]:
    """Batched forward pass; ``x`` has shape ``(n, d)``."""
    h = np.asarray(x, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != params.arch[0]:
        raise ShapeError(f"expected input of shape (n, {params.arch[0]}), got {h.shape}")
    cache = ForwardCache(params)
    last = len(params.weights) - 1
    for k, (W, b) in enumerate(zip(params.weights, params.biases)):
        cache.activations.append(h)
        z = h @ W.T + b
        h = z if k == last else np.maximum(z, 0.0)
    cache.logits = h
    return softmax(h), cache


def forward(params: NetworkParams, x) -> np.ndarray:
    """Class probabilities for one sample (1-D ``x``) or a batch (2-D ``x``)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return forward_cached(params, x[None, :])[0][0]
    return forward_cached(params, x)[0]


def backward(params: NetworkParams, grad_logits, cache: ForwardCache) -> NetworkParams:
    """Back-propagate ``dL/dlogits`` (shape ``(n, C)``) to parameter gradients.

    ``grad_logits`` must already contain any batch averaging; the gradients
    are summed over the batch rows.
    """
    if cache.params is not params or cache.logits is None:
        raise RuntimeError("forward cache was not produced by these parameters")
    g = np.asarray(grad_logits, dtype=np.float64)
    if g.shape != cache.logits.shape:
        raise RuntimeError(f"upstream gradient {g.shape} does not match cached logits "
                           f"{cache.logits.shape}")
    n_layers = len(params.weights)
    gW: list[np.ndarray] = [None] * n_layers
    gb: list[np.ndarray] = [None] * n_layers
    for k in range(n_layers - 1, -1, -1):
        a = cache.activations[k]
        gW[k] = g.T @ a
        gb[k] = g.sum(axis=0)
        if k:
            # a is the ReLU output of the previous layer; a > 0 <=> pre-activation > 0
            g = (g @ params.weights[k]) * (a > 0)
    return NetworkParams(gW, gb)


def add_grads(a: NetworkParams, b: NetworkParams, scale: float = 1.0) -> NetworkParams:
    return NetworkParams([x + scale * y for x, y in zip(a.weights, b.weights)],
                         [x + scale * y for x, y in zip(a.biases, b.biases)])


@dataclass
class OptimizerState:
    velocity: NetworkParams
    momentum: float = 0.9
    weight_decay: float = 5e-4

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ConfigurationError(f"weight decay must be >= 0, got {self.weight_decay}")

    @classmethod
    def for_params(cls, params: NetworkParams, momentum=0.9, weight_decay=5e-4):
        return cls(params.zeros_like(), momentum, weight_decay)

    def copy(self) -> "OptimizerState":
        return OptimizerState(self.velocity.copy(), self.momentum, self.weight_decay)


def sgd_nesterov_step(params: NetworkParams, grads: NetworkParams, state: OptimizerState,
                      lr: float) -> tuple[NetworkParams, OptimizerState]:
    """One SGD step with Nesterov momentum and coupled L2 weight decay.

    v <- m v - lr g ;  theta <- theta + m v - lr g,  with g = grad + wd * theta.
    Inputs are left untouched.
    """
    if not lr > 0:
        raise ConfigurationError(f"learning rate must be positive, got {lr}")
    if not (params.same_shape(grads) and params.same_shape(state.velocity)):
        raise ShapeError("parameters, gradients and velocity must share shapes")
    if not grads.all_finite():
        raise NumericError("non-finite gradient entry")
    m, wd = state.momentum, state.weight_decay
    new_p, new_v = [], []
    for p, g, v in zip(params.arrays(), grads.arrays(), state.velocity.arrays()):
        g = g + wd * p
        v = m * v - lr * g
        new_v.append(v)
        new_p.append(p + m * v - lr * g)
    return (NetworkParams(new_p[0::2], new_p[1::2]),
            OptimizerState(NetworkParams(new_v[0::2], new_v[1::2]), m, wd))


def cosine_lr(t, T_total, alpha) -> float:
    """``alpha * cos(7 pi t / (16 T_total))``: decays to ~0.195 alpha at the end."""
    if T_total <= 0:
        raise ConfigurationError("total iteration count must be positive")
    if alpha <= 0:
        raise ConfigurationError(f"base learning rate must be positive, got {alpha}")
    if not 0 <= t <= T_total:
        raise ConfigurationError(f"iteration {t} outside [0, {T_total}]")
    return alpha * math.cos(7.0 * math.pi * t / (16.0 * T_total))
