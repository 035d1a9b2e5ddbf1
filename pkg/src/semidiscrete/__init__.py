"""Positivity-preserving integration of superlinear scalar SDEs.

The package centres on the semi-discrete exponential scheme (``sd``), which
keeps every iterate strictly positive by construction, together with the
tamed Euler (``tamed``), drift-implicit Milstein (``hms``) and classical
Euler-Maruyama (``em``) schemes for comparison, plus a coupled Monte Carlo
pipeline for measuring strong convergence against a fine-grid reference.
"""

from .analysis import (
    DEFAULT_FIT_SPECS,
    ConvergenceReport,
    ReportFit,
    ReportRow,
    build_report,
    fit_order,
)
from .errors import (
    ConfigError,
    DomainError,
    OverflowDiagnostic,
    PhiBoundError,
    ReferenceOverflowError,
    SemidiscreteError,
    UsageError,
)
from .models import (
    NAMED_PHIS,
    PHI_ONE,
    PHI_SIN,
    Coefficient,
    Family,
    Finding,
    ModelSpec,
    PhiFn,
    ValidationReport,
    check_phi_bound,
    eval_drift,
    eval_diffusion,
    example1,
    example2,
    example3,
    heston32,
    inverse_transform,
    signed_power,
    signed_power_32,
    transform_example2,
    validate_parameters,
)
from .montecarlo import (
    CHUNK_SIZE,
    DEFAULT_SEED,
    BatchErrorReport,
    ExperimentConfig,
    NegativityCensus,
    negativity_census,
    run_endpoint_errors,
    t_quantile,
)
from .paths import (
    BrownianLattice,
    GridSpec,
    coarsen,
    coarsen_increments,
    dump_lattice,
    gaussian_increments,
    generate_lattice,
    increment_matrix,
    load_lattice,
    pairwise_halve,
)
from .schemes import (
    EXPONENT_CLAMP,
    SD_MODES,
    EnsembleResult,
    PathResult,
    SchemeKind,
    StepInput,
    em_step,
    hms_step,
    sd_step,
    simulate_ensemble,
    simulate_path,
    simulate_series,
    tamed_step,
)

__version__ = "0.1.0"

__all__ = [
    "BatchErrorReport",
    "BrownianLattice",
    "CHUNK_SIZE",
    "Coefficient",
    "ConfigError",
    "ConvergenceReport",
    "DEFAULT_FIT_SPECS",
    "DEFAULT_SEED",
    "DomainError",
    "EXPONENT_CLAMP",
    "EnsembleResult",
    "ExperimentConfig",
    "Family",
    "Finding",
    "GridSpec",
    "ModelSpec",
    "NAMED_PHIS",
    "NegativityCensus",
    "OverflowDiagnostic",
    "PHI_ONE",
    "PHI_SIN",
    "PathResult",
    "PhiBoundError",
    "PhiFn",
    "ReferenceOverflowError",
    "ReportFit",
    "ReportRow",
    "SD_MODES",
    "SchemeKind",
    "SemidiscreteError",
    "StepInput",
    "UsageError",
    "ValidationReport",
    "build_report",
    "check_phi_bound",
    "coarsen",
    "coarsen_increments",
    "dump_lattice",
    "em_step",
    "eval_diffusion",
    "eval_drift",
    "example1",
    "example2",
    "example3",
    "fit_order",
    "gaussian_increments",
    "generate_lattice",
    "heston32",
    "hms_step",
    "increment_matrix",
    "inverse_transform",
    "load_lattice",
    "negativity_census",
    "pairwise_halve",
    "run_endpoint_errors",
    "sd_step",
    "signed_power",
    "signed_power_32",
    "simulate_ensemble",
    "simulate_path",
    "simulate_series",
    "t_quantile",
    "tamed_step",
    "transform_example2",
    "validate_parameters",
]
