"""Sparseness-enforcing projections, their derivatives and a sparse auto-encoder."""

from .baseline import hoyer_project
from .core import (
    InfeasibleSupportError,
    ProjectionResult,
    ProjectionTrace,
    SparseTarget,
    project_l0,
    project_nonneg,
    project_scale_free,
    project_unrestricted,
    sigma,
    target_for_sigma,
)
from .gradient import GradientOperator, NotDifferentiableError, grad_full, grad_l0, grad_vjp

__all__ = [
    "GradientOperator",
    "InfeasibleSupportError",
    "NotDifferentiableError",
    "ProjectionResult",
    "ProjectionTrace",
    "SparseTarget",
    "grad_full",
    "grad_l0",
    "grad_vjp",
    "hoyer_project",
    "project_l0",
    "project_nonneg",
    "project_scale_free",
    "project_unrestricted",
    "sigma",
    "target_for_sigma",
]
