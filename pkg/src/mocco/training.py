"""The training loop, evaluation protocol and run artifacts.

A run directory holds::

    config.yaml        echo of the full RunConfig
    metrics.jsonl      one MetricRecord per evaluation (deterministic per seed)
    metrics.csv        same rows as CSV
    episodes.csv       one row per finished training episode
    timing.csv         wall-clock seconds per evaluation step (not deterministic)
    summary.json       status, first success step, final-10 score
    q_diagnostics.csv  Q / Q-true / Q-MC probes (when probe_interval > 0)
    trace.csv          per-step zeta and a_e for guided exploration (when trace)
    surface.csv        psi/Q over the action plane (when surface_resolution > 0)
    snapshot/          final network parameters in the mlp-v1 text format
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import numcore
from .agent import Agent
from .config import RunConfig, dump_config
from .controller import controller_train_step
from .envs import Env, InputError, make_env
from .numcore import NumericError
from .replay import EpisodeBuffer, Transition, finalize_episode, mc_buffer, sample_uniform, stage_step, transition_buffer

log = logging.getLogger(__name__)

METRIC_FIELDS = (
    "step", "eval_return_mean", "eval_return_std", "critic_loss", "controller_loss", "zeta_mean", "a_e_norm_mean",
)


@dataclass
class MetricRecord:
    step: int
    eval_return_mean: float
    eval_return_std: float
    critic_loss: float | None = None
    controller_loss: float | None = None
    zeta_mean: float | None = None
    a_e_norm_mean: float | None = None
    wall_time_s: float = 0.0

    def row(self) -> dict:
        """The deterministic part written to metrics.jsonl / metrics.csv."""
        d = asdict(self)
        d.pop("wall_time_s")
        return d


class _Mean:
    def __init__(self):
        self.total, self.n = 0.0, 0

    def add(self, x: float):
        self.total += x
        self.n += 1

    def pop(self) -> float | None:
        out = self.total / self.n if self.n else None
        self.total, self.n = 0.0, 0
        return out


class RunStreams:
    """Independent RNG streams derived from the master seed, one per purpose."""

    NAMES = ("init", "env", "explore", "sample", "target_noise", "eval", "probe")

    def __init__(self, seed: int):
        children = np.random.SeedSequence(seed).spawn(len(self.NAMES))
        self.seeds = {n: int(c.generate_state(1)[0]) for n, c in zip(self.NAMES, children)}
        self.env = np.random.default_rng(self.seeds["env"])
        self.explore = np.random.default_rng(self.seeds["explore"])
        self.sample = np.random.default_rng(self.seeds["sample"])
        self.target_noise = np.random.default_rng(self.seeds["target_noise"])
        self.probe = np.random.default_rng(self.seeds["probe"])

    def next_reset_seed(self) -> int:
        return int(self.env.integers(0, 2**31 - 1))


def evaluation_seeds(seed: int, episodes: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(episodes)]


def evaluate_policy(agent: Agent, env: Env, episodes: int = 10, seed: int = 0) -> tuple[float, float]:
    """Mean and std of undiscounted returns of the deterministic policy over ``episodes`` resets."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    returns = []
    for s in evaluation_seeds(seed, episodes):
        obs = env.reset(s)
        total = 0.0
        while True:
            res = env.step(agent.select_action_eval(obs))
            total += res.reward
            obs = res.observation
            if res.terminated or res.truncated:
                break
        returns.append(total)
    return float(np.mean(returns)), float(np.std(returns))


class _CSVLog:
    def __init__(self, path: Path, header):
        self.f = open(path, "w", newline="")
        self.w = csv.writer(self.f, lineterminator="\n")
        self.w.writerow(header)

    def write(self, row):
        self.w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])

    def close(self):
        self.f.close()


@dataclass
class RunResult:
    output_dir: Path
    status: str
    first_success_step: int | None
    final10_mean: float | None
    episodes: int
    critic_updates: int
    actor_updates: int
    stopped_at_step: int | None = None

    @property
    def metrics_path(self) -> Path:
        return self.output_dir / "metrics.jsonl"


def final_score(eval_means: list[float], last: int = 10) -> float | None:
    """Mean of the last ``last`` evaluation scores."""
    if not eval_means:
        return None
    return float(np.mean(eval_means[-last:]))


def run_training(config: RunConfig, *, agent: Agent | None = None) -> RunResult:
    """Run one training job and write its artifacts under ``config.output_dir``."""
    from .diagnostics import q_diagnostics_probe, surface_dump

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(config, out / "config.yaml")
    for stale in ("FAILED",):
        (out / stale).unlink(missing_ok=True)

    env = make_env(config.env_name)
    eval_env = make_env(config.env_name)
    spec = env.spec
    streams = RunStreams(config.seed)
    if agent is None:
        agent = Agent(config.agent_name, spec, config.agent_config(), seed=streams.seeds["init"])
    cfg = agent.config

    main = transition_buffer(config.buffer_capacity, spec.obs_dim, spec.action_dim)
    mc = mc_buffer(config.mc_capacity, spec.obs_dim, spec.action_dim)
    staging = EpisodeBuffer()

    jsonl = open(out / "metrics.jsonl", "w")
    metrics_csv = _CSVLog(out / "metrics.csv", METRIC_FIELDS)
    timing_csv = _CSVLog(out / "timing.csv", ("step", "wall_time_s"))
    episodes_csv = _CSVLog(out / "episodes.csv", ("end_step", "return", "length", "success"))
    probe_csv = _CSVLog(out / "q_diagnostics.csv", ("step", "q_td_mean", "q_true_mean", "q_mc_mean")) \
        if config.probe_interval > 0 else None
    trace_csv = None
    if config.trace and agent.controller is not None:
        trace_csv = _CSVLog(out / "trace.csv", ("step", *[f"zeta_{i}" for i in range(spec.action_dim)],
                                                *[f"a_e_{i}" for i in range(spec.action_dim)]))

    critic_loss, ctrl_loss, zeta_m, ae_m = _Mean(), _Mean(), _Mean(), _Mean()
    eval_means: list[float] = []
    first_success = None
    stopped_at = None
    n_episodes = 0
    status = "ok"
    t0 = time.perf_counter()
    obs = env.reset(streams.next_reset_seed())
    ep_return, ep_len = 0.0, 0
    try:
        for t in range(1, config.total_steps + 1):
            if t <= cfg.warmup_steps:
                action = streams.explore.uniform(spec.action_low, spec.action_high)
                corr = None
            else:
                action, corr = agent.select_action_train(obs, streams.explore)
            if corr is not None:
                zeta_m.add(float(np.mean(corr.zeta)))
                ae_m.add(float(np.linalg.norm(corr.a_e)))
                if trace_csv:
                    trace_csv.write([t, *map(float, corr.zeta), *map(float, corr.a_e)])
            res = env.step(action)
            stage_step(staging, Transition(obs, action, res.reward, res.observation, res.terminated))
            ep_return += res.reward
            ep_len += 1
            if res.terminated or res.truncated:
                finalize_episode(staging, main, mc, cfg.gamma)
                n_episodes += 1
                episodes_csv.write([t, float(ep_return), ep_len, int(res.success)])
                if res.success and first_success is None:
                    first_success = t
                obs = env.reset(streams.next_reset_seed())
                agent.reset_episode()
                ep_return, ep_len = 0.0, 0
            else:
                obs = res.observation

            if t > cfg.warmup_steps:
                batch = sample_uniform(main, cfg.batch_size, streams.sample)
                if batch is not None:
                    loss = agent.critic_update(batch, streams.target_noise)
                    if not math.isfinite(loss):
                        raise NumericError(f"critic loss diverged at step {t}")
                    critic_loss.add(loss)
                    if agent.controller is not None:
                        mc_batch = sample_uniform(mc, cfg.batch_size, streams.sample)
                        if mc_batch is not None:
                            c = controller_train_step(agent.controller, mc_batch)
                            if not math.isfinite(c):
                                raise NumericError(f"controller loss diverged at step {t}")
                            ctrl_loss.add(c)
                    if agent.critic_updates % cfg.policy_delay == 0:
                        agent.actor_update(batch)
                        agent.target_soft_update()

            if probe_csv is not None and t % config.probe_interval == 0 and len(main) >= config.probe_batch:
                probe = q_diagnostics_probe(agent, config.env_name, main, config.probe_batch,
                                            config.probe_horizon or spec.max_episode_steps, streams.probe, t)
                if probe is not None:
                    probe_csv.write([probe.step, probe.q_td_mean, probe.q_true_mean, probe.q_mc_mean])

            if t % config.eval_interval == 0:
                mean, std = evaluate_policy(agent, eval_env, config.eval_episodes, streams.seeds["eval"])
                rec = MetricRecord(t, mean, std, critic_loss.pop(), ctrl_loss.pop(), zeta_m.pop(), ae_m.pop(),
                                   time.perf_counter() - t0)
                eval_means.append(mean)
                jsonl.write(json.dumps(rec.row(), allow_nan=False) + "\n")
                metrics_csv.write([rec.row()[k] for k in METRIC_FIELDS])
                timing_csv.write([t, rec.wall_time_s])
                log.info("step %d eval %.3f +- %.3f", t, mean, std)
                if mean >= config.stop_at_return:
                    stopped_at = t
                    break
    except (FloatingPointError, InputError) as exc:
        status = "diverged"
        (out / "FAILED").write_text(f"{type(exc).__name__}: {exc}\n")
        log.error("run aborted: %s", exc)
    finally:
        for h in (metrics_csv, timing_csv, episodes_csv, probe_csv, trace_csv):
            if h is not None:
                h.close()
        jsonl.close()

    if status == "ok":
        _snapshot(agent, out / "snapshot")
        if config.surface_resolution > 0 and agent.controller is not None and spec.action_dim == 2:
            surface_dump(agent, obs, config.surface_resolution, out / "surface.csv")

    result = RunResult(out, status, first_success, final_score(eval_means), n_episodes,
                       agent.critic_updates, agent.actor_updates, stopped_at)
    summary = {
        "status": status,
        "first_success_step": first_success,
        "final10_mean": result.final10_mean,
        "episodes": n_episodes,
        "critic_updates": agent.critic_updates,
        "actor_updates": agent.actor_updates,
        "stopped_at_step": stopped_at,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return result


def _snapshot(agent: Agent, path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)
    numcore.save(agent.nets.actor, path / "actor.txt")
    for i, c in enumerate(agent.nets.critics):
        numcore.save(c, path / f"critic{i}.txt")
    if agent.controller is not None:
        for i, m in enumerate(agent.controller.members):
            numcore.save(m, path / f"ensemble{i}.txt")


def read_metrics(path: str | Path) -> list[dict]:
    path = Path(path)
    if path.is_dir():
        path = path / "metrics.jsonl"
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]
