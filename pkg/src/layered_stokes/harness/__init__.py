"""Verification suites and their command-line driver."""

from .config import ConfigError, RunConfig, default_config, load_config
from .experiments import (CRITERIA, EstimateReport, SweepAborted, all_passed, band_limited,
                          run_caccioppoli, run_divergence_check, run_experiment,
                          run_interface_scan, run_l2_estimate, run_lq_sweep,
                          run_oscillation_decay, run_pressure_oscillation, run_sharp_maximal,
                          run_solve)

__all__ = [
    "ConfigError", "RunConfig", "default_config", "load_config", "CRITERIA", "EstimateReport",
    "SweepAborted", "all_passed", "band_limited", "run_caccioppoli", "run_divergence_check",
    "run_experiment", "run_interface_scan", "run_l2_estimate", "run_lq_sweep",
    "run_oscillation_decay", "run_pressure_oscillation", "run_sharp_maximal", "run_solve",
]
