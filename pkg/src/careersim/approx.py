"""Dense networks with exact reverse-mode gradients and Adam, in numpy.

Double precision throughout; small fixed operator set (affine layers, tanh or
relu hidden units, linear or softmax heads). Training helpers abort on any
non-finite gradient rather than continuing with poisoned parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Mlp",
    "init_mlp",
    "forward",
    "forward_batch",
    "forward_cache",
    "backward_batch",
    "SelectedSquaredError",
    "ValueRegression",
    "WeightedLogProb",
    "grad",
    "loss_value",
    "AdamState",
    "init_adam",
    "adam_step",
    "flatten_params",
    "set_params",
    "clone",
]

_HIDDEN = ("tanh", "relu")
_OUTPUT = ("linear", "softmax")


@dataclass
class Mlp:
    dims: tuple[int, ...]
    hidden: str
    output: str
    weights: list[np.ndarray]  # weights[i] has shape (dims[i+1], dims[i])
    biases: list[np.ndarray]


def init_mlp(dims, hidden: str = "tanh", output: str = "linear", seed=0) -> Mlp:
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or min(dims) < 1:
        raise ValueError(f"need at least input and output dims, all positive: {dims}")
    if hidden not in _HIDDEN:
        raise ValueError(f"hidden activation must be one of {_HIDDEN}")
    if output not in _OUTPUT:
        raise ValueError(f"output activation must be one of {_OUTPUT}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        if hidden == "relu":
            bound = math.sqrt(6.0 / fan_in)
        else:
            bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(dims=dims, hidden=hidden, output=output, weights=weights, biases=biases)


def clone(net: Mlp) -> Mlp:
    return Mlp(net.dims, net.hidden, net.output,
               [w.copy() for w in net.weights], [b.copy() for b in net.biases])


def _act(net: Mlp, z: np.ndarray) -> np.ndarray:
    if net.hidden == "tanh":
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _check_input(net: Mlp, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.dims[0]:
        raise ValueError(f"expected input of width {net.dims[0]}, got shape {X.shape}")
    return X


def forward_batch(net: Mlp, X) -> np.ndarray:
    a = _check_input(net, X)
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ W.T + b
        if i < last:
            a = _act(net, z)
        else:
            a = _softmax(z) if net.output == "softmax" else z
    return a


def forward(net: Mlp, x) -> np.ndarray:
    return forward_batch(net, np.asarray(x, dtype=np.float64)[None, :])[0]


def forward_cache(net: Mlp, X):
    """Forward pass keeping layer inputs and pre-activations for backprop."""
    a = _check_input(net, X)
    inputs, pre = [], []
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(a)
        z = a @ W.T + b
        pre.append(z)
        if i < last:
            a = _act(net, z)
        else:
            a = _softmax(z) if net.output == "softmax" else z
    return inputs, pre, a


def backward_batch(net: Mlp, cache, d_out: np.ndarray):
    """Parameter gradients summed over batch rows.

    `d_out` is the loss gradient with respect to the network output (after
    the output activation).
    """
    inputs, pre, out = cache
    if net.output == "softmax":
        dz = out * (d_out - (d_out * out).sum(axis=1, keepdims=True))
    else:
        dz = d_out
    d_weights = [None] * len(net.weights)
    d_biases = [None] * len(net.biases)
    for i in range(len(net.weights) - 1, -1, -1):
        d_weights[i] = dz.T @ inputs[i]
        d_biases[i] = dz.sum(axis=0)
        if i > 0:
            da = dz @ net.weights[i]
            if net.hidden == "tanh":
                dz = da * (1.0 - np.tanh(pre[i - 1]) ** 2)
            else:
                dz = da * (pre[i - 1] > 0.0)
    return d_weights, d_biases


# ---------------------------------------------------------------------------
# Loss specifications for single-sample gradients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SelectedSquaredError:
    """(out[index] - target)^2 scaled by weight."""

    index: int
    target: float
    weight: float = 1.0

    def value(self, out: np.ndarray) -> float:
        return self.weight * float(out[self.index] - self.target) ** 2

    def d_out(self, out: np.ndarray) -> np.ndarray:
        g = np.zeros_like(out)
        g[self.index] = 2.0 * self.weight * (out[self.index] - self.target)
        return g


@dataclass(frozen=True)
class ValueRegression:
    """Sum of squared errors against a full target vector."""

    target: tuple[float, ...]

    def value(self, out: np.ndarray) -> float:
        t = np.asarray(self.target)
        return float(((out - t) ** 2).sum())

    def d_out(self, out: np.ndarray) -> np.ndarray:
        return 2.0 * (out - np.asarray(self.target))


@dataclass(frozen=True)
class WeightedLogProb:
    """-weight * log out[index] - entropy_coef * H(out), for softmax heads."""

    index: int
    weight: float
    entropy_coef: float = 0.0

    def value(self, out: np.ndarray) -> float:
        v = -self.weight * math.log(float(out[self.index]))
        if self.entropy_coef:
            p = out[out > 0.0]
            v -= self.entropy_coef * float(-(p * np.log(p)).sum())
        return v

    def d_out(self, out: np.ndarray) -> np.ndarray:
        g = np.zeros_like(out)
        g[self.index] = -self.weight / float(out[self.index])
        if self.entropy_coef:
            safe = np.maximum(out, 1e-300)
            g += self.entropy_coef * (np.log(safe) + 1.0)
        return g


def loss_value(net: Mlp, x, loss) -> float:
    return loss.value(forward(net, x))


def grad(net: Mlp, x, loss):
    """Exact gradients of one loss at one input: (d_weights, d_biases, value)."""
    cache = forward_cache(net, np.asarray(x, dtype=np.float64)[None, :])
    out = cache[2][0]
    value = loss.value(out)
    d_out = loss.d_out(out)[None, :]
    d_weights, d_biases = backward_batch(net, cache, d_out)
    for g in d_weights + d_biases:
        if not np.isfinite(g).all():
            raise FloatingPointError("non-finite gradient")
    return d_weights, d_biases, value


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def init_adam(net: Mlp, learning_rate: float = 1e-3) -> AdamState:
    params = net.weights + net.biases
    return AdamState(
        learning_rate=learning_rate,
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
    )


def adam_step(net: Mlp, grads, state: AdamState) -> tuple[Mlp, AdamState]:
    """One bias-corrected Adam update, in place on `net` and `state`."""
    d_weights, d_biases = grads
    params = net.weights + net.biases
    gs = list(d_weights) + list(d_biases)
    if len(gs) != len(params):
        raise ValueError("gradient structure does not match the network")
    for p, g in zip(params, gs):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        if not np.isfinite(g).all():
            raise FloatingPointError("non-finite gradient")
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, gs, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return net, state


def flatten_params(net: Mlp) -> np.ndarray:
    return np.concatenate([p.ravel() for p in net.weights + net.biases])


def set_params(net: Mlp, vector: np.ndarray) -> None:
    pos = 0
    for p in net.weights + net.biases:
        n = p.size
        p[...] = vector[pos:pos + n].reshape(p.shape)
        pos += n
    if pos != vector.size:
        raise ValueError(f"parameter vector has {vector.size} entries, expected {pos}")
