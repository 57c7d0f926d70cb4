"""Experiment configuration, seeded sweeps and the command-line interface."""

from .config import ConfigError, ExperimentConfig, parse_config, parse_config_text
from .runner import emit_convergence_trace, run_experiment

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "emit_convergence_trace",
    "parse_config",
    "parse_config_text",
    "run_experiment",
]
