"""Experiment harness: configuration, runners, persistence, CLI."""

from .config import (
    DEFAULT_DELTA,
    DEFAULT_GAMMA,
    DEFAULT_RHO,
    ExperimentConfig,
    SummaryRow,
    TrialRecord,
    default_eps_grid,
    proportion_row,
    wilson_ci,
)
from .experiments import (
    CensusResult,
    SuiteCheck,
    SuiteReport,
    run_distance_experiment,
    run_inequality_suite,
    run_singularity_census,
    run_smallball_validation,
    run_tail_experiment,
)
from .io import fmt17, records_csv, run_json, summary_csv, summary_path_for, write_run

__all__ = [
    "DEFAULT_DELTA",
    "DEFAULT_GAMMA",
    "DEFAULT_RHO",
    "ExperimentConfig",
    "SummaryRow",
    "TrialRecord",
    "default_eps_grid",
    "proportion_row",
    "wilson_ci",
    "CensusResult",
    "SuiteCheck",
    "SuiteReport",
    "run_distance_experiment",
    "run_inequality_suite",
    "run_singularity_census",
    "run_smallball_validation",
    "run_tail_experiment",
    "fmt17",
    "records_csv",
    "run_json",
    "summary_csv",
    "summary_path_for",
    "write_run",
]
