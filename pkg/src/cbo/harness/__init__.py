"""Experiment configuration, run directories, figures and the command line."""

from .compare import compare_runs
from .config import ConfigError, ExperimentConfig, parse_config
from .experiment import ExperimentError, RunManifest, run_experiment, sweep_alpha
from .plotting import render_plots

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentError",
    "RunManifest",
    "compare_runs",
    "parse_config",
    "render_plots",
    "run_experiment",
    "sweep_alpha",
]
