"""Guided exploration via a Monte-Carlo critic ensemble, and the MOCCO learner."""

from .agent import Agent, AgentConfig
from .config import RunConfig, load_config
from .envs import make_env

__all__ = ["Agent", "AgentConfig", "RunConfig", "load_config", "make_env"]
__version__ = "0.1.0"
