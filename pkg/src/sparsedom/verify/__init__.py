"""Experiment runner reproducing the inequalities and sharpness claims numerically."""

from .config import DEFAULTS, EXPERIMENTS, ConfigError, ExperimentConfig, load_config, make_config
from .report import ReportRow, slope_fit, svg_plot
from .runner import RunResult, run

__all__ = [
    "DEFAULTS",
    "EXPERIMENTS",
    "ConfigError",
    "ExperimentConfig",
    "ReportRow",
    "RunResult",
    "load_config",
    "make_config",
    "run",
    "slope_fit",
    "svg_plot",
]
