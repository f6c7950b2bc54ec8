"""One-hidden-layer sigmoid networks trained by online backpropagation.

Weights carry their bias as the last column: ``w1`` is
``n_hidden x (n_in + 1)`` and ``w2`` is ``n_out x (n_hidden + 1)``.
The loss for one sample is the masked squared error
``0.5 * sum(mask * (out - target) ** 2)``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np

FORMAT_VERSION = 1
DEFAULT_LEARNING_RATE = 0.3


class SpecError(ValueError):
    pass


class LoadError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkSpec:
    n_in: int
    n_hidden: int
    n_out: int

    def __post_init__(self):
        for name in ("n_in", "n_hidden", "n_out"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise SpecError(f"{name} must be a positive integer, got {v!r}")

    @property
    def w1_shape(self) -> tuple[int, int]:
        return (self.n_hidden, self.n_in + 1)

    @property
    def w2_shape(self) -> tuple[int, int]:
        return (self.n_out, self.n_hidden + 1)

    def __str__(self):
        return f"{self.n_in}:{self.n_hidden}:{self.n_out}"


SIMPLE_PREDICTION = NetworkSpec(6, 10, 1)
FOURNET_PREDICTION = NetworkSpec(6, 12, 1)
REWARD = NetworkSpec(8, 16, 2)
INTUITION = NetworkSpec(8, 24, 3)
AGENT_SPECS = (SIMPLE_PREDICTION, FOURNET_PREDICTION, REWARD, INTUITION)


@dataclass
class Network:
    spec: NetworkSpec
    w1: np.ndarray
    w2: np.ndarray
    learning_rate: float = DEFAULT_LEARNING_RATE

    def __post_init__(self):
        self.w1 = np.ascontiguousarray(self.w1, dtype=np.float64)
        self.w2 = np.ascontiguousarray(self.w2, dtype=np.float64)
        if self.w1.shape != self.spec.w1_shape:
            raise SpecError(f"w1 shape {self.w1.shape} != {self.spec.w1_shape}")
        if self.w2.shape != self.spec.w2_shape:
            raise SpecError(f"w2 shape {self.w2.shape} != {self.spec.w2_shape}")
        if not self.learning_rate > 0:
            raise SpecError("learning_rate must be positive")

    def copy(self) -> Network:
        return Network(self.spec, self.w1.copy(), self.w2.copy(), self.learning_rate)

    def same_weights(self, other: Network) -> bool:
        return (np.array_equal(self.w1, other.w1) and np.array_equal(self.w2, other.w2))


@dataclass(frozen=True)
class TrainingSample:
    input: np.ndarray
    target: np.ndarray
    mask: np.ndarray | None = None

    def mask_or_ones(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(len(self.target))
        return np.asarray(self.mask, dtype=np.float64)


def init_network(spec: NetworkSpec, seed, learning_rate: float = DEFAULT_LEARNING_RATE) -> Network:
    """Weights uniform in (-0.5, 0.5), biases zero.

    ``seed`` is anything ``numpy.random.default_rng`` accepts, including a
    ``SeedSequence`` or an existing ``Generator``.
    """
    rng = np.random.default_rng(seed)
    w1 = rng.uniform(-0.5, 0.5, spec.w1_shape)
    w2 = rng.uniform(-0.5, 0.5, spec.w2_shape)
    w1[:, -1] = 0.0
    w2[:, -1] = 0.0
    return Network(spec, w1, w2, learning_rate)


def zero_network(spec: NetworkSpec, learning_rate: float = DEFAULT_LEARNING_RATE) -> Network:
    return Network(spec, np.zeros(spec.w1_shape), np.zeros(spec.w2_shape), learning_rate)


# ---------------------------------------------------------------------------
# kernels

@numba.njit(cache=True)
def _sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z))


@numba.njit(cache=True)
def _hidden(w1, x, h):
    n_in = x.shape[0]
    for i in range(w1.shape[0]):
        z = w1[i, n_in]
        for j in range(n_in):
            z += w1[i, j] * x[j]
        h[i] = _sigmoid(z)


@numba.njit(cache=True)
def _output(w2, h, out):
    nh = h.shape[0]
    for k in range(w2.shape[0]):
        z = w2[k, nh]
        for i in range(nh):
            z += w2[k, i] * h[i]
        out[k] = _sigmoid(z)


@numba.njit(cache=True)
def _forward(w1, w2, x):
    h = np.empty(w1.shape[0])
    out = np.empty(w2.shape[0])
    _hidden(w1, x, h)
    _output(w2, h, out)
    return out


@numba.njit(cache=True)
def _forward_batch(w1, w2, xs):
    h = np.empty(w1.shape[0])
    out = np.empty((xs.shape[0], w2.shape[0]))
    for r in range(xs.shape[0]):
        _hidden(w1, xs[r], h)
        _output(w2, h, out[r])
    return out


@numba.njit(cache=True)
def _gradients(w1, w2, x, target, mask, g1, g2):
    """Fill g1, g2 with d(loss)/d(w); return the loss before the step."""
    n_in = x.shape[0]
    nh = w1.shape[0]
    no = w2.shape[0]
    h = np.empty(nh)
    out = np.empty(no)
    _hidden(w1, x, h)
    _output(w2, h, out)
    d2 = np.empty(no)
    loss = 0.0
    for k in range(no):
        err = mask[k] * (out[k] - target[k])
        loss += 0.5 * err * (out[k] - target[k])
        d2[k] = err * out[k] * (1.0 - out[k])
        for i in range(nh):
            g2[k, i] = d2[k] * h[i]
        g2[k, nh] = d2[k]
    for i in range(nh):
        s = 0.0
        for k in range(no):
            s += w2[k, i] * d2[k]
        d1 = s * h[i] * (1.0 - h[i])
        for j in range(n_in):
            g1[i, j] = d1 * x[j]
        g1[i, n_in] = d1
    return loss


@numba.njit(cache=True)
def _sgd_step(w1, w2, x, target, mask, lr):
    g1 = np.empty_like(w1)
    g2 = np.empty_like(w2)
    _gradients(w1, w2, x, target, mask, g1, g2)
    w1 -= lr * g1
    w2 -= lr * g2


# ---------------------------------------------------------------------------
# public operations

def _as_input(net: Network, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.spec.n_in,):
        raise ValueError(f"input shape {x.shape} does not match {net.spec}")
    return x


def forward(net: Network, x) -> np.ndarray:
    """Network output in ``(0, 1) ** n_out``.  Does not modify ``net``."""
    return _forward(net.w1, net.w2, _as_input(net, x))


def forward_batch(net: Network, xs) -> np.ndarray:
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != net.spec.n_in:
        raise ValueError(f"batch shape {xs.shape} does not match {net.spec}")
    return _forward_batch(net.w1, net.w2, xs)


def _checked(net: Network, sample: TrainingSample):
    x = _as_input(net, sample.input)
    t = np.asarray(sample.target, dtype=np.float64)
    m = sample.mask_or_ones()
    if t.shape != (net.spec.n_out,) or m.shape != (net.spec.n_out,):
        raise ValueError(f"target/mask length does not match {net.spec}")
    return x, t, m


def masked_loss(net: Network, sample: TrainingSample) -> float:
    x, t, m = _checked(net, sample)
    err = _forward(net.w1, net.w2, x) - t
    return float(0.5 * np.sum(m * err * err))


def analytic_gradient(net: Network, sample: TrainingSample) -> tuple[np.ndarray, np.ndarray]:
    """Backprop gradients of the masked loss, as used by :func:`backprop_step`."""
    x, t, m = _checked(net, sample)
    g1 = np.empty_like(net.w1)
    g2 = np.empty_like(net.w2)
    _gradients(net.w1, net.w2, x, t, m, g1, g2)
    return g1, g2


def backprop_step(net: Network, sample: TrainingSample) -> Network:
    """One SGD step on ``sample``.  Updates ``net`` in place and returns it.

    An all-zero mask is a no-op (with a warning).
    """
    x, t, m = _checked(net, sample)
    if not m.any():
        warnings.warn("backprop_step called with an all-zero mask; skipped", stacklevel=2)
        return net
    _sgd_step(net.w1, net.w2, x, t, m, net.learning_rate)
    return net


def train_step(net: Network, x: np.ndarray, target: np.ndarray, mask: np.ndarray) -> None:
    """Unchecked in-place SGD step for the training loop's hot path."""
    _sgd_step(net.w1, net.w2, x, target, mask, net.learning_rate)


def numeric_gradient(net: Network, sample: TrainingSample,
                     epsilon: float = 1e-5) -> tuple[np.ndarray, np.ndarray]:
    """Central finite differences of the masked loss w.r.t. every weight."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    x, t, m = _checked(net, sample)

    def loss(w1, w2):
        err = _forward(w1, w2, x) - t
        return 0.5 * np.sum(m * err * err)

    w1, w2 = net.w1.copy(), net.w2.copy()
    grads = []
    for w in (w1, w2):
        g = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            orig = w[idx]
            w[idx] = orig + epsilon
            up = loss(w1, w2)
            w[idx] = orig - epsilon
            down = loss(w1, w2)
            w[idx] = orig
            g[idx] = (up - down) / (2 * epsilon)
        grads.append(g)
    return grads[0], grads[1]


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-7) -> float:
    """Max elementwise ``|a - b| / max(|a| + |b|, floor)``."""
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), floor)))


# ---------------------------------------------------------------------------
# persistence

def network_to_dict(net: Network) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "spec": [net.spec.n_in, net.spec.n_hidden, net.spec.n_out],
        "learning_rate": net.learning_rate,
        "w1": net.w1.tolist(),
        "w2": net.w2.tolist(),
    }


def network_from_dict(d: dict) -> Network:
    if not isinstance(d, dict):
        raise LoadError("network record must be a JSON object")
    for key in ("format_version", "spec", "learning_rate", "w1", "w2"):
        if key not in d:
            raise LoadError(f"missing field '{key}'")
    if d["format_version"] != FORMAT_VERSION:
        raise LoadError(f"format_version: expected {FORMAT_VERSION}, got {d['format_version']!r}")
    try:
        spec = NetworkSpec(*d["spec"])
    except (TypeError, SpecError) as exc:
        raise LoadError(f"spec: {exc}") from None
    lr = d["learning_rate"]
    if not isinstance(lr, (int, float)) or not math.isfinite(lr) or lr <= 0:
        raise LoadError("learning_rate: must be a positive finite number")
    arrays = {}
    for key, shape in (("w1", spec.w1_shape), ("w2", spec.w2_shape)):
        try:
            arr = np.array(d[key], dtype=np.float64)
        except (TypeError, ValueError):
            raise LoadError(f"{key}: not a numeric matrix") from None
        if arr.shape != shape:
            raise LoadError(f"{key}: shape {arr.shape} does not match spec {spec} (expected {shape})")
        if not np.all(np.isfinite(arr)):
            raise LoadError(f"{key}: contains non-finite values")
        arrays[key] = arr
    return Network(spec, arrays["w1"], arrays["w2"], float(lr))


def save_network(net: Network) -> bytes:
    """Serialize to JSON bytes.  Floats use the shortest round-trip repr."""
    return json.dumps(network_to_dict(net), allow_nan=False).encode()


def load_network(data: bytes | str) -> Network:
    try:
        d = json.loads(data)
    except json.JSONDecodeError as exc:
        raise LoadError(f"not valid JSON: {exc}") from None
    return network_from_dict(d)
