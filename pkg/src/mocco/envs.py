"""Analytic continuous-control tasks with a uniform episodic interface.

Three small environments, all with actions in [-1, 1]^d:

``point_mass``
    State (x, y, vx, vy). Positions clipped to [-0.3, 0.3], velocities to
    [-2, 2] (the per-axis terminal speed gain/damping). Semi-implicit Euler,
    dt=0.02, gain=1.0, damping=0.5. Reward 1 inside radius 0.05 of the origin,
    else exp(-0.5 * ((d - 0.05) / 0.1)**2). 250 steps. Reset: position
    U(-0.25, 0.25)^2, velocity 0.

``pendulum_swingup``
    Angle theta (0 = upright, pi = hanging), angular velocity omega clipped to
    [-8, 8]. Torque u = 2 * a, g=10, m=1, l=1, dt=0.05, semi-implicit Euler.
    Reward 1 when cos(theta) >= 0.95, else 0. 400 steps. Observation
    (cos theta, sin theta, omega). Reset: theta = pi + U(-0.05, 0.05), omega 0.

``sparse_mountain_car``
    Position in [-1.2, 0.6], velocity in [-0.07, 0.07], power 0.0015. Goal
    at position >= 0.45 terminates with reward +100; otherwise reward is
    -0.1 * a**2. 1000 steps. Reset: position U(-0.6, -0.4), velocity 0.

Dynamics are deterministic; randomness enters only through ``reset``. Every
environment supports state injection via ``restore(observation)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InputError(ValueError):
    pass


@dataclass(frozen=True)
class EnvSpec:
    obs_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    max_episode_steps: int
    max_reward: float = 1.0
    min_reward: float = 0.0


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    success: bool = False


class Env:
    name = "base"
    spec: EnvSpec

    def __init__(self):
        self.t = 0

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        self.t = 0
        self._reset(rng)
        return self.observation()

    def step(self, action) -> StepResult:
        a = np.asarray(action, dtype=np.float64).reshape(self.spec.action_dim)
        if not np.all(np.isfinite(a)):
            raise InputError(f"non-finite action {a}")
        a = np.clip(a, self.spec.action_low, self.spec.action_high)
        reward, terminated = self._advance(a)
        self.t += 1
        truncated = self.t >= self.spec.max_episode_steps
        return StepResult(self.observation(), float(reward), terminated, truncated, success=terminated)

    def restore(self, observation, t: int = 0) -> None:
        """Set the physical state from an observation and the step counter to ``t``."""
        self.t = t
        self._restore(np.asarray(observation, dtype=np.float64))

    # subclasses
    def _reset(self, rng): raise NotImplementedError
    def _advance(self, a): raise NotImplementedError
    def _restore(self, obs): raise NotImplementedError
    def observation(self) -> np.ndarray: raise NotImplementedError


class PointMass2D(Env):
    name = "point_mass"
    dt = 0.02
    gain = 1.0
    damping = 0.5
    pos_limit = 0.3
    vel_limit = 2.0
    target_radius = 0.05
    margin = 0.1
    spec = EnvSpec(4, 2, np.array([-1.0, -1.0]), np.array([1.0, 1.0]), 250)

    def __init__(self):
        super().__init__()
        self.pos = np.zeros(2)
        self.vel = np.zeros(2)

    def _reset(self, rng):
        self.pos = rng.uniform(-0.25, 0.25, size=2)
        self.vel = np.zeros(2)

    def reward(self) -> float:
        d = float(np.hypot(*self.pos))
        if d <= self.target_radius:
            return 1.0
        return math.exp(-0.5 * ((d - self.target_radius) / self.margin) ** 2)

    def _advance(self, a):
        self.vel = np.clip(self.vel + self.dt * (self.gain * a - self.damping * self.vel), -self.vel_limit, self.vel_limit)
        self.pos = np.clip(self.pos + self.dt * self.vel, -self.pos_limit, self.pos_limit)
        return self.reward(), False

    def _restore(self, obs):
        self.pos = obs[:2].copy()
        self.vel = obs[2:4].copy()

    def observation(self):
        return np.concatenate([self.pos, self.vel])


class PendulumSwingup(Env):
    name = "pendulum_swingup"
    g = 10.0
    m = 1.0
    l = 1.0
    dt = 0.05
    max_torque = 2.0
    max_speed = 8.0
    spec = EnvSpec(3, 1, np.array([-1.0]), np.array([1.0]), 400)

    def __init__(self):
        super().__init__()
        self.theta = math.pi
        self.omega = 0.0

    def _reset(self, rng):
        self.theta = math.pi + rng.uniform(-0.05, 0.05)
        self.omega = 0.0

    def _advance(self, a):
        u = self.max_torque * float(a[0])
        acc = -3.0 * self.g / (2.0 * self.l) * math.sin(self.theta + math.pi) + 3.0 / (self.m * self.l**2) * u
        self.omega = min(max(self.omega + self.dt * acc, -self.max_speed), self.max_speed)
        self.theta = self.theta + self.dt * self.omega
        return (1.0 if math.cos(self.theta) >= 0.95 else 0.0), False

    def _restore(self, obs):
        self.theta = math.atan2(obs[1], obs[0])
        self.omega = float(obs[2])

    def observation(self):
        return np.array([math.cos(self.theta), math.sin(self.theta), self.omega])


class SparseMountainCar(Env):
    name = "sparse_mountain_car"
    min_pos, max_pos = -1.2, 0.6
    max_speed = 0.07
    power = 0.0015
    goal = 0.45
    goal_reward = 100.0
    spec = EnvSpec(2, 1, np.array([-1.0]), np.array([1.0]), 1000, max_reward=100.0, min_reward=-0.1)

    def __init__(self):
        super().__init__()
        self.pos = -0.5
        self.vel = 0.0

    def _reset(self, rng):
        self.pos = rng.uniform(-0.6, -0.4)
        self.vel = 0.0

    def _advance(self, a):
        force = float(a[0])
        self.vel = min(max(self.vel + force * self.power - 0.0025 * math.cos(3 * self.pos), -self.max_speed), self.max_speed)
        self.pos = min(max(self.pos + self.vel, self.min_pos), self.max_pos)
        if self.pos == self.min_pos and self.vel < 0:
            self.vel = 0.0
        if self.pos >= self.goal:
            return self.goal_reward, True
        return -0.1 * force * force, False

    def _restore(self, obs):
        self.pos = float(obs[0])
        self.vel = float(obs[1])

    def observation(self):
        return np.array([self.pos, self.vel])


ENVIRONMENTS = {cls.name: cls for cls in (PointMass2D, PendulumSwingup, SparseMountainCar)}


def make_env(name: str) -> Env:
    try:
        return ENVIRONMENTS[name]()
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None


def env_reset(env: Env, seed: int) -> np.ndarray:
    return env.reset(seed)


def env_step(env: Env, action) -> StepResult:
    return env.step(action)


def env_spec(env: Env) -> EnvSpec:
    return env.spec
