"""Run configuration: one flat record, loadable from YAML or JSON.

Every field has a default. A config file is a flat mapping of field names to
values; command-line ``--set key=value`` pairs override it.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

import yaml

from .agent import AGENT_KINDS, AgentConfig, canonical_mode
from .envs import ENVIRONMENTS

AGENT_FIELDS = tuple(f.name for f in fields(AgentConfig))


@dataclass
class RunConfig:
    env_name: str = "point_mass"
    agent_name: str = "td3"
    # empty means the agent's natural mode: gaussian for td3, guided for mocco
    exploration_mode: str = ""
    total_steps: int = 200_000
    eval_interval: int = 2_000
    eval_episodes: int = 10
    seed: int = 0
    buffer_capacity: int = 1_000_000
    mc_capacity: int = 100_000
    output_dir: str = "runs/default"

    gamma: float = 0.99
    tau: float = 0.005
    policy_delay: int = 2
    batch_size: int = 256
    beta: float = 0.1
    gaussian_sigma: float = 0.1
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    target_noise_sigma: float = 0.2
    target_noise_clip: float = 0.5
    warmup_steps: int = 1_000
    hidden: tuple[int, ...] = (256, 256)
    learning_rate: float = 3e-4
    ensemble_size: int = 3
    ensemble_hidden: tuple[int, ...] = (256, 256)
    scaling_window: int = 1_000

    # diagnostics; 0 disables the Q probe
    probe_interval: int = 0
    probe_batch: int = 256
    probe_horizon: int = 0  # 0 means the environment's episode limit
    trace: bool = False
    surface_resolution: int = 0  # >0 dumps a psi/Q surface at the end of the run
    stop_at_return: float = math.inf  # end the run once an evaluation reaches this score

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in _as_list(self.hidden))
        self.ensemble_hidden = tuple(int(h) for h in _as_list(self.ensemble_hidden))
        if self.env_name not in ENVIRONMENTS:
            raise ValueError(f"unknown env_name {self.env_name!r}; choose from {sorted(ENVIRONMENTS)}")
        if self.agent_name not in AGENT_KINDS:
            raise ValueError(f"unknown agent_name {self.agent_name!r}; choose from {AGENT_KINDS}")
        if not self.exploration_mode:
            self.exploration_mode = "guided" if self.agent_name == "mocco" else "gaussian"
        self.exploration_mode = canonical_mode(self.exploration_mode)
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")
        if self.eval_interval <= 0 or self.eval_episodes <= 0:
            raise ValueError("eval_interval and eval_episodes must be positive")
        if self.buffer_capacity <= 0 or self.mc_capacity <= 0:
            raise ValueError("buffer capacities must be positive")
        self.agent_config()  # validates the shared fields

    def agent_config(self) -> AgentConfig:
        return AgentConfig(**{k: getattr(self, k) for k in AGENT_FIELDS if k != "exploration_mode"},
                           exploration_mode=self.exploration_mode)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        d["ensemble_hidden"] = list(self.ensemble_hidden)
        return d


def _as_list(v):
    if isinstance(v, str):
        return [int(x) for x in v.replace("(", "").replace(")", "").replace("[", "").replace("]", "").split(",") if x.strip()]
    if isinstance(v, int):
        return [v]
    return list(v)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def coerce(key: str, value: Any) -> Any:
    if key not in _FIELD_TYPES:
        raise KeyError(f"unknown config key {key!r}")
    kind = _FIELD_TYPES[key]
    if isinstance(value, str) and kind in ("int", "float", "bool"):
        value = yaml.safe_load(value)
    if kind == "int":
        f = float(value)
        if f != int(f):
            raise ValueError(f"{key} must be an integer, got {value!r}")
        return int(f)
    if kind == "float":
        return float(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ValueError(f"{key} must be true/false, got {value!r}")
        return value
    if kind == "str":
        return str(value)
    return value


def from_mapping(mapping: dict[str, Any], base: RunConfig | None = None) -> RunConfig:
    current = (base or RunConfig()).to_dict()
    for k, v in mapping.items():
        current[k] = coerce(k, v)
    return RunConfig(**current)


def load_config(path: str | Path | None, overrides: dict[str, Any] | None = None) -> RunConfig:
    mapping: dict[str, Any] = {}
    if path is not None:
        text = Path(path).read_text()
        mapping = json.loads(text) if str(path).endswith(".json") else (yaml.safe_load(text) or {})
        if not isinstance(mapping, dict):
            raise ValueError(f"{path}: config must be a flat key-value mapping")
        nested = [k for k, v in mapping.items() if isinstance(v, dict)]
        if nested:
            raise ValueError(f"{path}: nested sections are not supported ({nested})")
    mapping.update(overrides or {})
    return from_mapping(mapping)


def dump_config(config: RunConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(config.to_dict(), sort_keys=True))
