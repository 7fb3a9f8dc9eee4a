"""TD3 and MOCCO learners on top of :mod:`mocco.numcore`.

``Agent(kind="td3")`` keeps twin critics and uses the clipped double-Q
target. ``Agent(kind="mocco")`` keeps a single critic and adds a penalty
pulling it toward the ensemble mean of Monte-Carlo critics (weight ``beta``).
Either one can explore with no noise, Gaussian noise, OU noise, or the
guided correction from :mod:`mocco.controller`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .controller import Correction, Ensemble, ScalingState, ensemble_predict, epsilon_init, exploratory_correction
from .envs import EnvSpec
from .numcore import (
    AdamState,
    Head,
    MLPParams,
    NumericError,
    adam_step,
    mlp_backward,
    mlp_backward_cached,
    mlp_forward,
    mlp_forward_cached,
    mlp_init,
    soft_update,
)

EXPLORATION_MODES = ("none", "gaussian", "ou", "guided")
_MODE_ALIASES = {"no_expl": "none", "noexpl": "none", "normal": "gaussian", "ge": "guided"}
AGENT_KINDS = ("td3", "mocco")


def canonical_mode(mode: str) -> str:
    mode = _MODE_ALIASES.get(mode.lower(), mode.lower())
    if mode not in EXPLORATION_MODES:
        raise ValueError(f"unknown exploration mode {mode!r}")
    return mode


@dataclass
class AgentConfig:
    gamma: float = 0.99
    tau: float = 0.005
    policy_delay: int = 2
    batch_size: int = 256
    beta: float = 0.1
    exploration_mode: str = "gaussian"
    gaussian_sigma: float = 0.1  # fraction of the half action range
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    target_noise_sigma: float = 0.2
    target_noise_clip: float = 0.5
    warmup_steps: int = 1000
    hidden: tuple[int, ...] = (256, 256)
    learning_rate: float = 3e-4
    ensemble_size: int = 3
    ensemble_hidden: tuple[int, ...] = (256, 256)
    scaling_window: int = 1000

    def __post_init__(self):
        self.exploration_mode = canonical_mode(self.exploration_mode)
        self.hidden = tuple(int(h) for h in self.hidden)
        self.ensemble_hidden = tuple(int(h) for h in self.ensemble_hidden)
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.policy_delay < 1 or self.batch_size < 1 or self.warmup_steps < 0:
            raise ValueError("policy_delay and batch_size must be >= 1, warmup_steps >= 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        for name in ("gamma", "tau", "beta", "gaussian_sigma", "ou_theta", "ou_sigma",
                     "target_noise_sigma", "target_noise_clip", "learning_rate"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass
class OUState:
    x: np.ndarray
    theta: float = 0.15
    sigma: float = 0.2

    def reset(self):
        self.x = np.zeros_like(self.x)


def ou_step(ou: OUState, rng: np.random.Generator) -> np.ndarray:
    """x <- x + theta * (0 - x) + sigma * N(0, I); returns the new x."""
    ou.x = ou.x + ou.theta * (0.0 - ou.x) + ou.sigma * rng.standard_normal(ou.x.shape)
    return ou.x


@dataclass
class ActorCritic:
    actor: MLPParams
    actor_target: MLPParams
    critics: list[MLPParams]
    critic_targets: list[MLPParams]
    actor_opt: AdamState
    critic_opts: list[AdamState]


class Agent:
    """Actor-critic learner plus (when needed) its directional controller."""

    def __init__(self, kind: str, spec: EnvSpec, config: AgentConfig | None = None, seed: int = 0):
        if kind not in AGENT_KINDS:
            raise ValueError(f"unknown agent {kind!r}; choose from {AGENT_KINDS}")
        self.kind = kind
        self.spec = spec
        self.config = config or AgentConfig()
        cfg = self.config
        self.low = np.asarray(spec.action_low, dtype=np.float64)
        self.high = np.asarray(spec.action_high, dtype=np.float64)
        self.half_range = 0.5 * (self.high - self.low)
        self.head = Head.tanh(self.low, self.high)
        self.obs_dim, self.action_dim = spec.obs_dim, spec.action_dim

        actor_rng, critic_rng, ens_seed = np.random.SeedSequence(seed).spawn(3)
        actor_rng, critic_rng = np.random.default_rng(actor_rng), np.random.default_rng(critic_rng)
        actor = mlp_init((self.obs_dim, *cfg.hidden, self.action_dim), actor_rng)
        n_critics = 2 if kind == "td3" else 1
        critics = [mlp_init((self.obs_dim + self.action_dim, *cfg.hidden, 1), critic_rng) for _ in range(n_critics)]
        self.nets = ActorCritic(
            actor=actor,
            actor_target=actor.copy(),
            critics=critics,
            critic_targets=[c.copy() for c in critics],
            actor_opt=AdamState.for_params(actor, cfg.learning_rate),
            critic_opts=[AdamState.for_params(c, cfg.learning_rate) for c in critics],
        )

        self.controller: Ensemble | None = None
        self.scaling: ScalingState | None = None
        if kind == "mocco" or cfg.exploration_mode == "guided":
            self.controller = Ensemble.create(
                self.obs_dim, self.action_dim, cfg.ensemble_hidden, cfg.ensemble_size,
                seed=int(ens_seed.generate_state(1)[0]), learning_rate=cfg.learning_rate,
            )
            self.scaling = ScalingState(self.action_dim, cfg.scaling_window, epsilon_init(spec))
        self.ou = OUState(np.zeros(self.action_dim), cfg.ou_theta, cfg.ou_sigma)
        self.critic_updates = 0
        self.actor_updates = 0

    # -- acting --------------------------------------------------------------

    def clip(self, a) -> np.ndarray:
        return np.clip(a, self.low, self.high)

    def base_action(self, state) -> np.ndarray:
        return mlp_forward(self.nets.actor, state, self.head)

    def select_action_eval(self, state) -> np.ndarray:
        return self.clip(self.base_action(state))

    def select_action_train(self, state, rng: np.random.Generator) -> tuple[np.ndarray, Correction | None]:
        """Exploratory action for data collection; also returns the guided correction when used."""
        a_b = self.base_action(state)
        mode = self.config.exploration_mode
        corr = None
        if mode == "none":
            a = a_b
        elif mode == "gaussian":
            a = a_b + rng.normal(0.0, 1.0, self.action_dim) * (self.config.gaussian_sigma * self.half_range)
        elif mode == "ou":
            a = a_b + ou_step(self.ou, rng) * self.half_range
        else:
            corr = exploratory_correction(self.controller, self.scaling, state, a_b)
            a = a_b + corr.a_e
        return self.clip(a), corr

    def reset_episode(self) -> None:
        self.ou.reset()

    # -- learning ------------------------------------------------------------

    def _joint(self, s, a):
        return np.concatenate([s, a], axis=1)

    def _target_action(self, next_state, rng):
        cfg = self.config
        a = mlp_forward(self.nets.actor_target, next_state, self.head)
        noise = rng.normal(0.0, 1.0, a.shape) * (cfg.target_noise_sigma * self.half_range)
        lim = cfg.target_noise_clip * self.half_range
        return self.clip(a + np.clip(noise, -lim, lim))

    def _td_target(self, batch, rng) -> np.ndarray:
        s2 = batch["next_state"]
        a2 = self._target_action(s2, rng)
        x2 = self._joint(s2, a2)
        q_next = mlp_forward(self.nets.critic_targets[0], x2)[:, 0]
        for tgt in self.nets.critic_targets[1:]:
            q_next = np.minimum(q_next, mlp_forward(tgt, x2)[:, 0])
        y = batch["reward"] + self.config.gamma * (1.0 - batch["done"]) * q_next
        if not np.all(np.isfinite(y)):
            raise NumericError("non-finite TD target")
        return y

    def td3_critic_update(self, batch, rng: np.random.Generator) -> float:
        """Regress every critic onto r + gamma * (1 - done) * min_j Q_target_j(s', a')."""
        y = self._td_target(batch, rng)
        x = self._joint(batch["state"], batch["action"])
        bsz = x.shape[0]
        loss = 0.0
        for critic, opt in zip(self.nets.critics, self.nets.critic_opts):
            out, cache = mlp_forward_cached(critic, x)
            err = out[:, 0] - y
            loss += float(np.mean(err * err))
            bundle = mlp_backward_cached(critic, cache, (2.0 / bsz) * err[:, None])
            adam_step(critic, opt, bundle.by_parameter)
        self.critic_updates += 1
        return loss

    def mocco_critic_update(self, batch, rng: np.random.Generator) -> float:
        """Single-critic TD loss plus beta * (Q - Q_MC)^2, with Q_MC the ensemble mean held fixed."""
        y = self._td_target(batch, rng)
        x = self._joint(batch["state"], batch["action"])
        bsz = x.shape[0]
        beta = self.config.beta
        if beta > 0:
            q_mc = ensemble_predict(self.controller, batch["state"], batch["action"]).mean(axis=0)
        else:
            q_mc = np.zeros(bsz)
        critic, opt = self.nets.critics[0], self.nets.critic_opts[0]
        out, cache = mlp_forward_cached(critic, x)
        q = out[:, 0]
        err_td = q - y
        err_mc = q - q_mc
        loss = float(np.mean(err_td * err_td + beta * (err_mc * err_mc)))
        upstream = (2.0 / bsz) * (err_td + beta * err_mc)
        bundle = mlp_backward_cached(critic, cache, upstream[:, None])
        adam_step(critic, opt, bundle.by_parameter)
        self.critic_updates += 1
        return loss

    def critic_update(self, batch, rng) -> float:
        if self.kind == "td3":
            return self.td3_critic_update(batch, rng)
        return self.mocco_critic_update(batch, rng)

    def actor_update(self, batch) -> float:
        """Ascend mean Q_1(s, pi(s)); returns -mean Q before the step."""
        s = batch["state"]
        bsz = s.shape[0]
        a, actor_cache = mlp_forward_cached(self.nets.actor, s, self.head)
        q, cb = mlp_backward(self.nets.critics[0], self._joint(s, a), np.full((bsz, 1), -1.0 / bsz))
        d_action = cb.by_input[:, self.obs_dim:]
        ab = mlp_backward_cached(self.nets.actor, actor_cache, d_action)
        adam_step(self.nets.actor, self.nets.actor_opt, ab.by_parameter)
        self.actor_updates += 1
        return -float(np.mean(q))

    def target_soft_update(self, tau: float | None = None) -> None:
        tau = self.config.tau if tau is None else tau
        for tgt, src in zip(self.nets.critic_targets, self.nets.critics):
            soft_update(tgt, src, tau)
        soft_update(self.nets.actor_target, self.nets.actor, tau)

    def q_value(self, state, action) -> np.ndarray:
        s = np.atleast_2d(state)
        a = np.atleast_2d(action)
        if s.shape[0] != a.shape[0]:
            s = np.broadcast_to(s, (a.shape[0], s.shape[1]))
        return mlp_forward(self.nets.critics[0], self._joint(s, a))[:, 0]
