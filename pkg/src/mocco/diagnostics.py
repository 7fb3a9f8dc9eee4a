"""Probes for Q-value bias and the psi/Q surfaces over a 2-D action plane."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .agent import Agent
from .controller import ensemble_predict, uncertainty
from .envs import make_env
from .replay import RingBuffer, sample_uniform


class UnsupportedOperation(ValueError):
    pass


@dataclass
class QDiagnostics:
    step: int
    q_td_mean: float
    q_true_mean: float
    q_mc_mean: float | None


def rollout_returns(agent: Agent, env_name: str, states, actions, horizon: int, gamma: float) -> np.ndarray:
    """Discounted return of taking ``actions[j]`` in ``states[j]`` and then following the
    deterministic policy, for ``horizon`` steps at most. All rollouts advance in lockstep."""
    envs = [make_env(env_name) for _ in range(len(states))]
    for e, s in zip(envs, states):
        e.restore(s)
    n = len(envs)
    totals = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    obs = np.array(states, dtype=np.float64, copy=True)
    acts = np.asarray(actions, dtype=np.float64)
    discount = 1.0
    for k in range(horizon):
        if k > 0:
            if gamma == 0.0 or not alive.any():
                break
            acts = agent.clip(agent.base_action(obs))
        for j in np.flatnonzero(alive):
            res = envs[j].step(acts[j])
            totals[j] += discount * res.reward
            obs[j] = res.observation
            if res.terminated:
                alive[j] = False
        discount *= gamma
    return totals


def q_diagnostics_probe(agent: Agent, env_name: str, buffer: RingBuffer, batch_size: int, rollout_horizon: int,
                        rng, step: int = 0) -> QDiagnostics | None:
    """Average critic Q, true discounted return, and ensemble Q over a replay mini-batch."""
    probe_env = make_env(env_name)
    if not hasattr(probe_env, "restore"):
        warnings.warn(f"{env_name} does not support state injection; Q diagnostics disabled")
        return None
    batch = sample_uniform(buffer, batch_size, rng)
    if batch is None:
        return None
    s, a = batch["state"], batch["action"]
    q_td = float(np.mean(agent.q_value(s, a)))
    q_true = float(np.mean(rollout_returns(agent, env_name, s, a, rollout_horizon, agent.config.gamma)))
    q_mc = None
    if agent.controller is not None:
        q_mc = float(np.mean(ensemble_predict(agent.controller, s, a)))
    return QDiagnostics(step, q_td, q_true, q_mc)


def action_grid(low, high, resolution: int) -> np.ndarray:
    """``resolution**2`` points on the 2-D action box, first coordinate varying slowest."""
    g1 = np.linspace(low[0], high[0], resolution)
    g2 = np.linspace(low[1], high[1], resolution)
    a1, a2 = np.meshgrid(g1, g2, indexing="ij")
    return np.column_stack([a1.ravel(), a2.ravel()])


def surface_dump(agent: Agent, state, grid_resolution: int, path: str | Path | None = None) -> np.ndarray:
    """Evaluate psi(s, a) and Q(s, a) over the action lattice; rows are (a1, a2, psi, q)."""
    if agent.action_dim != 2:
        raise UnsupportedOperation(f"surface dumps need a 2-D action space, got {agent.action_dim}")
    if agent.controller is None:
        raise UnsupportedOperation("surface dumps need the ensemble controller")
    if grid_resolution < 1:
        raise ValueError("grid_resolution must be >= 1")
    grid = action_grid(agent.low, agent.high, grid_resolution)
    psi = uncertainty(agent.controller, state, grid)
    q = agent.q_value(state, grid)
    rows = np.column_stack([grid, psi, q])
    if path is not None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(("a1", "a2", "psi", "q"))
            for r in rows:
                w.writerow([repr(float(v)) for v in r])
    return rows


def read_csv_columns(path: str | Path) -> dict[str, np.ndarray]:
    with open(path) as f:
        rows = list(csv.DictReader(f))
    if not rows:
        return {}
    return {k: np.array([float(r[k]) if r[k] != "" else np.nan for r in rows]) for k in rows[0]}
