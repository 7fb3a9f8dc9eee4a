"""Replay storage: main buffer, per-episode staging, and the Monte-Carlo buffer.

Transitions are staged in an :class:`EpisodeBuffer` while an episode runs and
flushed by :func:`finalize_episode`, which pushes every step into the main
buffer and every ``(state, action, discounted return)`` into the MC buffer.

Time-limit truncation is not a terminal state: the ``done`` flag written to
the main buffer is the environment's ``terminated`` flag, so TD targets still
bootstrap. MC returns are computed over the observed steps only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool


@dataclass
class MCRecord:
    state: np.ndarray
    action: np.ndarray
    mc_return: float


class RingBuffer:
    """Fixed-capacity FIFO of records with named numpy columns.

    ``fields`` maps column name to per-record width (0 for a scalar column).
    Logical index 0 is always the oldest surviving record.
    """

    def __init__(self, capacity: int, fields: dict[str, int]):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.fields = dict(fields)
        self._data = {
            k: np.zeros((self.capacity, w) if w else self.capacity, dtype=np.float64) for k, w in self.fields.items()
        }
        self.write_cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def push(self, **row) -> None:
        i = self.write_cursor
        for k, col in self._data.items():
            col[i] = row[k]
        self.write_cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _physical(self, idx: np.ndarray) -> np.ndarray:
        start = self.write_cursor if self.size == self.capacity else 0
        return (start + idx) % self.capacity

    def __getitem__(self, i: int) -> dict[str, np.ndarray]:
        if not -self.size <= i < self.size:
            raise IndexError(i)
        j = int(self._physical(np.array(i % self.size)))
        return {k: col[j] for k, col in self._data.items()}

    def column(self, name: str) -> np.ndarray:
        """Column in logical (oldest-first) order."""
        return self._data[name][self._physical(np.arange(self.size))]

    def gather(self, idx) -> dict[str, np.ndarray]:
        j = self._physical(np.asarray(idx))
        return {k: col[j] for k, col in self._data.items()}


def transition_buffer(capacity: int, obs_dim: int, action_dim: int) -> RingBuffer:
    return RingBuffer(capacity, {"state": obs_dim, "action": action_dim, "reward": 0, "next_state": obs_dim, "done": 0})


def mc_buffer(capacity: int, obs_dim: int, action_dim: int) -> RingBuffer:
    return RingBuffer(capacity, {"state": obs_dim, "action": action_dim, "mc_return": 0})


class EpisodeBuffer:
    """Staging area for the running episode (time-ordered)."""

    def __init__(self):
        self.steps: list[Transition] = []

    def __len__(self):
        return len(self.steps)

    def clear(self):
        self.steps = []


def stage_step(episodic: EpisodeBuffer, t: Transition) -> None:
    episodic.steps.append(t)


def compute_returns(rewards, gamma: float) -> np.ndarray:
    """Discounted returns R_i = r_i + gamma * R_{i+1}, with R_last = r_last."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    r = np.asarray(rewards, dtype=np.float64)
    out = np.empty_like(r)
    acc = 0.0
    for i in range(len(r) - 1, -1, -1):
        acc = r[i] + gamma * acc if i < len(r) - 1 else r[i]
        out[i] = acc
    return out


def finalize_episode(episodic: EpisodeBuffer, main: RingBuffer, mc: RingBuffer, gamma: float) -> np.ndarray:
    """Flush the staged episode into ``main`` and ``mc``; returns the MC returns."""
    if not episodic.steps:
        return np.empty(0)
    returns = compute_returns([t.reward for t in episodic.steps], gamma)
    for t, ret in zip(episodic.steps, returns):
        main.push(state=t.state, action=t.action, reward=t.reward, next_state=t.next_state, done=float(t.done))
        mc.push(state=t.state, action=t.action, mc_return=ret)
    episodic.clear()
    return returns


def sample_uniform(buffer: RingBuffer, batch_size: int, rng) -> dict[str, np.ndarray] | None:
    """Uniform sample with replacement, or None if the buffer holds fewer than ``batch_size`` records.

    ``rng`` is a Generator (advanced in place) or an integer seed.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    if len(buffer) < batch_size:
        return None
    idx = rng.integers(0, len(buffer), size=batch_size)
    return buffer.gather(idx)
