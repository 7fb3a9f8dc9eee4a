"""Small fixed-topology MLPs with exact backprop, plus Adam.

Everything runs in float64 on numpy arrays. Networks are plain parameter
containers; forward/backward are free functions so the same code serves the
actor, the critics and the ensemble members.

Weights are stored as ``(fan_in, fan_out)`` matrices and applied as
``x @ W + b``. Inputs may be a single vector ``(d,)`` or a batch ``(B, d)``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class ShapeError(ValueError):
    pass


class NumericError(FloatingPointError):
    pass


class ConfigurationError(ValueError):
    pass


@dataclass
class MLPParams:
    """Weights and biases of one network.

    All parameters live in one contiguous vector ``data`` (order W0, b0, W1,
    b1, ...); ``weights`` and ``biases`` are views into it. Edit them in
    place, never rebind them.
    """

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    data: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ShapeError("number of weight/bias arrays does not match layer_sizes")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[i], self.layer_sizes[i + 1])
            if np.shape(w) != expected or np.shape(b) != (expected[1],):
                raise ShapeError(f"layer {i}: got W{np.shape(w)} b{np.shape(b)}, expected W{expected}")
        self.data = np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in _interleave(self.weights, self.biases)])
        self.weights, self.biases = [], []
        offset = 0
        for fi, fo in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            self.weights.append(self.data[offset:offset + fi * fo].reshape(fi, fo))
            offset += fi * fo
            self.biases.append(self.data[offset:offset + fo])
            offset += fo

    @property
    def arrays(self) -> list[np.ndarray]:
        """Parameter arrays in canonical order W0, b0, W1, b1, ..."""
        return _interleave(self.weights, self.biases)

    def copy(self) -> "MLPParams":
        return MLPParams(self.layer_sizes, self.weights, self.biases)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.data)))

    def flat(self) -> np.ndarray:
        return self.data.copy()


def _interleave(weights, biases) -> list:
    out = []
    for w, b in zip(weights, biases):
        out.extend((w, b))
    return out


@dataclass(frozen=True)
class Head:
    """Output head. ``kind`` is ``"identity"`` or ``"tanh"``.

    The tanh head maps to ``[low, high]`` via ``mid + half * tanh(z)``.
    """

    kind: str = "identity"
    low: np.ndarray | None = None
    high: np.ndarray | None = None

    @classmethod
    def tanh(cls, low, high) -> "Head":
        return cls("tanh", np.asarray(low, dtype=np.float64), np.asarray(high, dtype=np.float64))

    def __post_init__(self):
        if self.kind not in ("identity", "tanh"):
            raise ConfigurationError(f"unknown head {self.kind!r}")
        if self.kind == "tanh" and (self.low is None or self.high is None):
            raise ConfigurationError("tanh head needs low and high bounds")


IDENTITY = Head()


@dataclass
class GradientBundle:
    by_parameter: list[np.ndarray]  # canonical order, same as MLPParams.arrays
    by_input: np.ndarray


@dataclass
class AdamState:
    """Adam moments for one MLPParams, stored flat like ``MLPParams.data``."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps_stability: float = 1e-8
    step_count: int = 0

    @classmethod
    def for_params(cls, params: MLPParams, learning_rate: float = 3e-4, **kw) -> "AdamState":
        if learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        return cls(np.zeros_like(params.data), np.zeros_like(params.data), learning_rate, **kw)


def mlp_init(layer_sizes: Sequence[int], seed: int | np.random.Generator) -> MLPParams:
    """Uniform fan-in initialization: every entry drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    sizes = list(layer_sizes)
    if len(sizes) < 2 or any(int(s) <= 0 for s in sizes):
        raise ConfigurationError(f"layer_sizes needs >= 2 positive entries, got {sizes}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MLPParams(tuple(sizes), weights, biases)


def _as_batch(params: MLPParams, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != params.layer_sizes[0]:
        raise ShapeError(f"input shape {x.shape} does not match input size {params.layer_sizes[0]}")
    return xb, single


def _forward_cached(params: MLPParams, xb: np.ndarray, head: Head):
    acts = [xb]
    h = xb
    n = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        if i < n - 1:
            h = np.maximum(z, 0.0)
        else:
            h = z
        acts.append(h)
    out = h
    if head.kind == "tanh":
        t = np.tanh(out)
        acts.append(t)
        half = 0.5 * (head.high - head.low)
        out = 0.5 * (head.high + head.low) + half * t
    return out, acts


def mlp_forward(params: MLPParams, x, head: Head = IDENTITY) -> np.ndarray:
    """Forward pass. Hidden layers use ReLU; the last layer goes through ``head``."""
    xb, single = _as_batch(params, x)
    out, _ = _forward_cached(params, xb, head)
    return out[0] if single else out


@dataclass
class ForwardCache:
    acts: list[np.ndarray]
    head: Head
    single: bool


def mlp_forward_cached(params: MLPParams, x, head: Head = IDENTITY) -> tuple[np.ndarray, ForwardCache]:
    """Forward pass that keeps the activations for a later :func:`mlp_backward_cached`."""
    xb, single = _as_batch(params, x)
    out, acts = _forward_cached(params, xb, head)
    return (out[0] if single else out), ForwardCache(acts, head, single)


def mlp_backward_cached(params: MLPParams, cache: ForwardCache, upstream) -> GradientBundle:
    """Backprop ``upstream`` = dL/d(output) through a cached forward pass.

    Parameter gradients are summed over the batch; input gradients are
    returned per sample.
    """
    acts = list(cache.acts)
    batch = acts[0].shape[0]
    g = np.asarray(upstream, dtype=np.float64)
    shape = (batch, params.layer_sizes[-1])
    g = g.reshape(shape) if g.size == batch * shape[1] else np.broadcast_to(g, shape)
    if not np.all(np.isfinite(g)):
        raise NumericError("non-finite upstream gradient")
    n = len(params.weights)
    head = cache.head
    if head.kind == "tanh":
        t = acts.pop()
        g = g * (0.5 * (head.high - head.low)) * (1.0 - t * t)
    grads: list[np.ndarray] = [None] * (2 * n)  # type: ignore[list-item]
    for i in range(n - 1, -1, -1):
        if i < n - 1:
            # ReLU derivative at exactly 0 is taken as 0
            g = g * (acts[i + 1] > 0.0)
        grads[2 * i] = acts[i].T @ g
        grads[2 * i + 1] = g.sum(axis=0)
        g = g @ params.weights[i].T
    return GradientBundle(grads, g[0] if cache.single else g)


def mlp_backward(params: MLPParams, x, upstream, head: Head = IDENTITY) -> tuple[np.ndarray, GradientBundle]:
    """Forward and backward in one call; returns ``(output, bundle)``."""
    out, cache = mlp_forward_cached(params, x, head)
    return out, mlp_backward_cached(params, cache, upstream)


def mlp_grad_params(params: MLPParams, x, upstream=1.0, head: Head = IDENTITY) -> GradientBundle:
    return mlp_backward(params, x, upstream, head)[1]


def mlp_grad_input(params: MLPParams, x, head: Head = IDENTITY) -> np.ndarray:
    """Gradient of the scalar network output with respect to the input."""
    if params.layer_sizes[-1] != 1:
        raise ShapeError("mlp_grad_input needs a scalar-output network")
    xb, single = _as_batch(params, x)
    _, bundle = mlp_backward(params, xb, np.ones((xb.shape[0], 1)), head)
    return bundle.by_input[0] if single else bundle.by_input


def adam_step(params: MLPParams, adam: AdamState, grads: Sequence[np.ndarray]) -> None:
    """One bias-corrected Adam update, in place on ``params`` and ``adam``.

    Raises NumericError (leaving both untouched) if any gradient is non-finite.
    """
    arrays = params.arrays
    if len(grads) != len(arrays) or any(g.shape != a.shape for g, a in zip(grads, arrays)):
        raise ShapeError("gradient shapes do not match parameters")
    g = np.concatenate([np.ravel(x) for x in grads])
    if not np.all(np.isfinite(g)):
        raise NumericError("non-finite gradient; update skipped")
    adam.step_count += 1
    t = adam.step_count
    b1, b2 = adam.beta1, adam.beta2
    m, v = adam.first_moment, adam.second_moment
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * (g * g)
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    params.data -= adam.learning_rate * m_hat / (np.sqrt(v_hat) + adam.eps_stability)


def soft_update(target: MLPParams, source: MLPParams, tau: float) -> None:
    """target <- tau * source + (1 - tau) * target, in place."""
    target.data *= 1.0 - tau
    target.data += tau * source.data


# -- snapshot format -------------------------------------------------------
#
# Plain text, one value per token:
#   line 1: "mlp-v1"
#   line 2: layer sizes separated by spaces
#   then for each layer: one line of row-major weights, one line of biases,
#   every float written with repr() so a round trip is exact.


def dumps(params: MLPParams) -> str:
    buf = io.StringIO()
    buf.write("mlp-v1\n")
    buf.write(" ".join(str(s) for s in params.layer_sizes) + "\n")
    for w, b in zip(params.weights, params.biases):
        buf.write(" ".join(repr(float(v)) for v in w.ravel()) + "\n")
        buf.write(" ".join(repr(float(v)) for v in b) + "\n")
    return buf.getvalue()


def loads(text: str) -> MLPParams:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "mlp-v1":
        raise ValueError("not an mlp-v1 snapshot")
    sizes = [int(s) for s in lines[1].split()]
    weights, biases = [], []
    for i, (fi, fo) in enumerate(zip(sizes[:-1], sizes[1:])):
        w = np.array([float(v) for v in lines[2 + 2 * i].split()], dtype=np.float64)
        b = np.array([float(v) for v in lines[3 + 2 * i].split()], dtype=np.float64)
        weights.append(w.reshape(fi, fo))
        biases.append(b)
    return MLPParams(tuple(sizes), weights, biases)


def save(params: MLPParams, path) -> None:
    Path(path).write_text(dumps(params))


def load(path) -> MLPParams:
    return loads(Path(path).read_text())
