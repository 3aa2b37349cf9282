"""Multipatch dG isogeometric Poisson solver with dual-primal tearing and
interconnecting (IETI-DP) domain decomposition."""

from ._core import (
    Error,
    ExperimentConfig,
    ExperimentRecord,
    LogSquaredFit,
    ParameterError,
    ScalingRecord,
    SolverError,
    bspline_basis,
    emit_report,
    export_geometry,
    fit_log_squared,
    kron_matvec,
    num_jobs,
    run_experiment,
    scaling_study,
    set_num_jobs,
)

__all__ = [
    "Error",
    "ExperimentConfig",
    "ExperimentRecord",
    "LogSquaredFit",
    "ParameterError",
    "ScalingRecord",
    "SolverError",
    "bspline_basis",
    "emit_report",
    "export_geometry",
    "fit_log_squared",
    "kron_matvec",
    "num_jobs",
    "run_experiment",
    "scaling_study",
    "set_num_jobs",
]
