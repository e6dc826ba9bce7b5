"""Experiment configuration, execution and the command line entry point."""

from .config import ConfigError, ExperimentConfig, parse_config, serialize_config
from .runner import run

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "serialize_config", "run"]
