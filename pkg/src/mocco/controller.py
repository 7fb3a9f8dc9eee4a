"""Directional controller: an ensemble of Monte-Carlo Q-regressors.

The ensemble's disagreement (population variance of member predictions) is
the uncertainty signal. Its gradient with respect to the action points toward
less explored actions; :func:`exploratory_correction` turns that gradient into
an additive action offset whose size is set by ``epsilon`` (expected norm of a
uniform random action) and a per-dimension factor ``zeta`` in [0, 1] that
tracks how much the gradient has been fluctuating lately.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .envs import EnvSpec
from .numcore import (
    AdamState,
    MLPParams,
    NumericError,
    adam_step,
    mlp_backward,
    mlp_backward_cached,
    mlp_forward,
    mlp_forward_cached,
    mlp_init,
)

GRAD_FLOOR = 1e-8


@dataclass
class Ensemble:
    members: list[MLPParams]
    optimizers: list[AdamState]
    state_dim: int
    action_dim: int

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError("an ensemble needs at least two members")
        sizes = {m.layer_sizes for m in self.members}
        if len(sizes) != 1:
            raise ValueError("ensemble members must share one topology")
        (ls,) = sizes
        if ls[0] != self.state_dim + self.action_dim or ls[-1] != 1:
            raise ValueError(f"member topology {ls} does not fit state_dim + action_dim -> 1")

    @property
    def n(self) -> int:
        return len(self.members)

    @classmethod
    def create(cls, state_dim, action_dim, hidden=(256, 256), n=3, seed=0, learning_rate=3e-4) -> "Ensemble":
        rng = np.random.default_rng(seed)
        sizes = (state_dim + action_dim, *hidden, 1)
        members = [mlp_init(sizes, rng) for _ in range(n)]
        opts = [AdamState.for_params(m, learning_rate) for m in members]
        return cls(members, opts, state_dim, action_dim)


def _joint(state, action) -> np.ndarray:
    s = np.asarray(state, dtype=np.float64)
    a = np.asarray(action, dtype=np.float64)
    # one state against a batch of actions (surface scans) or vice versa
    if s.ndim == 1 and a.ndim == 2:
        s = np.broadcast_to(s, (a.shape[0], s.size))
    elif s.ndim == 2 and a.ndim == 1:
        a = np.broadcast_to(a, (s.shape[0], a.size))
    return np.concatenate([s, a], axis=-1)


def ensemble_predict(ens: Ensemble, state, action) -> np.ndarray:
    """Member predictions; shape ``(n,)`` for one pair, ``(n, B)`` for a batch."""
    x = _joint(state, action)
    return np.stack([mlp_forward(m, x)[..., 0] for m in ens.members])


def uncertainty(ens: Ensemble, state, action):
    """Population variance of the member predictions (divides by n)."""
    return np.var(ensemble_predict(ens, state, action), axis=0)


def member_action_grads(ens: Ensemble, state, action) -> tuple[np.ndarray, np.ndarray]:
    """Per-member predictions ``(n,)`` and action gradients ``(n, |A|)`` at one pair."""
    x = _joint(state, action)
    qs, grads = [], []
    for m in ens.members:
        out, bundle = mlp_backward(m, x, np.ones(1))
        qs.append(out[0])
        grads.append(bundle.by_input[ens.state_dim:])
    return np.array(qs), np.array(grads)


def uncertainty_grad(ens: Ensemble, state, action) -> np.ndarray:
    """d Var / d action = (2/n) * sum_i (q_i - mean) * dq_i/da."""
    q, dq = member_action_grads(ens, state, action)
    return (2.0 / ens.n) * ((q - q.mean()) @ dq)


def controller_train_step(ens: Ensemble, batch: dict[str, np.ndarray]) -> float:
    """One Adam step per member on mean_batch sum_i (R - q_i)^2; returns that loss.

    ``batch`` holds ``state``, ``action`` and ``mc_return`` columns.
    """
    target = np.asarray(batch["mc_return"], dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(target)):
        raise NumericError("non-finite Monte-Carlo targets")
    x = _joint(batch["state"], batch["action"])
    bsz = x.shape[0]
    loss = 0.0
    grads_all = []
    for m in ens.members:
        out, cache = mlp_forward_cached(m, x)
        err = out[:, 0] - target
        loss += float(np.mean(err * err))
        bundle = mlp_backward_cached(m, cache, (2.0 / bsz) * err[:, None])
        grads_all.append(bundle.by_parameter)
    for m, opt, g in zip(ens.members, ens.optimizers, grads_all):
        adam_step(m, opt, g)
    return loss


def epsilon_init(spec: EnvSpec, sample_count: int = 100_000, seed: int = 0) -> float:
    """Expected Euclidean norm of an action drawn uniformly from the action box.

    One-dimensional boxes use the exact integral; otherwise a Monte-Carlo mean.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    lo = np.asarray(spec.action_low, dtype=np.float64)
    hi = np.asarray(spec.action_high, dtype=np.float64)
    if lo.size == 1:
        a, b = float(lo[0]), float(hi[0])
        if a >= 0 or b <= 0:
            return abs(a + b) / 2.0
        return (a * a + b * b) / (2.0 * (b - a))
    rng = np.random.default_rng(seed)
    u = rng.random((sample_count, lo.size))
    samples = lo + (hi - lo) * u
    return float(np.mean(np.linalg.norm(samples, axis=1)))


@dataclass
class ScalingState:
    """Running window of action gradients and the per-dimension max deviation."""

    action_dim: int
    window_capacity: int = 1000
    epsilon: float = 1.0
    window: np.ndarray = field(init=False)
    count: int = field(init=False, default=0)
    cursor: int = field(init=False, default=0)
    running_max_sigma: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.window_capacity < 1:
            raise ValueError("window_capacity must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        self.window = np.zeros((self.window_capacity, self.action_dim))
        self.running_max_sigma = np.zeros(self.action_dim)

    def contents(self) -> np.ndarray:
        return self.window[: self.count] if self.count < self.window_capacity else self.window


def scaling_update(ss: ScalingState, grad) -> np.ndarray:
    """Push ``grad`` into the window and return zeta = sigma_N / max sigma, per dimension."""
    g = np.asarray(grad, dtype=np.float64).reshape(ss.action_dim)
    ss.window[ss.cursor] = g
    ss.cursor = (ss.cursor + 1) % ss.window_capacity
    ss.count = min(ss.count + 1, ss.window_capacity)
    if ss.count < 2:
        return np.ones(ss.action_dim)
    sigma = ss.contents().std(axis=0)
    np.maximum(ss.running_max_sigma, sigma, out=ss.running_max_sigma)
    zeta = np.ones(ss.action_dim)
    nz = ss.running_max_sigma > 0
    zeta[nz] = sigma[nz] / ss.running_max_sigma[nz]
    return np.clip(zeta, 0.0, 1.0)


@dataclass
class Correction:
    a_e: np.ndarray
    zeta: np.ndarray
    raw_gradient: np.ndarray


def exploratory_correction(ens: Ensemble, ss: ScalingState, state, base_action) -> Correction:
    """a_e = (g / |g|) * epsilon * zeta elementwise, with g the uncertainty gradient at the base action."""
    g = uncertainty_grad(ens, state, base_action)
    zeta = scaling_update(ss, g)
    norm = float(np.linalg.norm(g))
    if norm < GRAD_FLOOR:
        a_e = np.zeros_like(g)
    else:
        a_e = (g / norm) * ss.epsilon * zeta
    return Correction(a_e, zeta, g)
