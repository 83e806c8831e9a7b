"""Config-driven ensemble sweeps, their file outputs, and the CLI."""

from .config import ConfigError, ExperimentConfig, default_config
from .output import emit_results
from .runners import ExperimentResult, NumericalFailure, run_experiment

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "default_config",
    "emit_results",
    "ExperimentResult",
    "NumericalFailure",
    "run_experiment",
]
