"""Experiment orchestration: configuration, runners, CSV/SVG output and CLI."""
from .config import (EXPERIMENTS, ConfigError, EnsembleRunConfig, RunConfig, parse_ini, preset,
                     preset_names, resolve, to_ini)
from .experiments import (run_break_analysis, run_experiment, run_initial_slope,
                          run_integrable_contrast, run_moments, run_structure_compare)
from .table import ResultTable, config_from_csv, emit_outputs, read_csv

__all__ = [
    "EXPERIMENTS", "ConfigError", "EnsembleRunConfig", "RunConfig", "ResultTable",
    "config_from_csv", "emit_outputs", "parse_ini", "preset", "preset_names", "read_csv",
    "resolve", "run_break_analysis", "run_experiment", "run_initial_slope",
    "run_integrable_contrast", "run_moments", "run_structure_compare", "to_ini",
]
