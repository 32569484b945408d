"""Experiment configuration, sweeps, summaries, plots and the CLI."""
from .config import ExperimentConfig, load_config, parse_config
from .experiment import run_experiment
from .plotting import emit_plot
from .presets import PRESETS, preset
from .summary import summarize

__all__ = ["ExperimentConfig", "PRESETS", "emit_plot", "load_config", "parse_config", "preset",
           "run_experiment", "summarize"]
