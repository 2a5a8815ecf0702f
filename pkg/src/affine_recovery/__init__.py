"""Worst-case optimal affine prediction of multivalued functions from point values."""

from .core import (
    COSINE,
    RKHS,
    AffineRecoveryMap,
    Certificate,
    DependenceSpec,
    ModelSetSpec,
    PointConfig,
    RecoveryProblem,
    SolverError,
    ValidationError,
    apply_map,
    empirical_error,
    validate_problem,
)

__version__ = "0.1.0"

__all__ = [
    "RKHS", "COSINE", "AffineRecoveryMap", "Certificate", "DependenceSpec", "ModelSetSpec",
    "PointConfig", "RecoveryProblem", "SolverError", "ValidationError", "apply_map",
    "empirical_error", "validate_problem",
]
