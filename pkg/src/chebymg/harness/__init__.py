"""Experiment configuration, runner, output and CLI."""

from .config import CaseConfig, ConfigError
from .runner import CaseResult, SweepResult, run_case, sweep, tune_lambda_min_empirical

__all__ = [
    "CaseConfig",
    "ConfigError",
    "CaseResult",
    "SweepResult",
    "run_case",
    "sweep",
    "tune_lambda_min_empirical",
]
