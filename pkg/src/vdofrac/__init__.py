"""Finite-difference solvers for multi-term variable-distributed order
time-fractional diffusion equations with Dirichlet or Robin data."""

from __future__ import annotations

from vdofrac.fracops import (
    DomainError,
    GammaQuadrature,
    InvalidDistributionError,
    KernelTable,
    OrderDistribution,
    build_kernel_table,
    build_quadrature,
    gamma_fn,
)
from vdofrac.mesh import Grid, thomas_solve
from vdofrac.problems import (
    Dirichlet,
    ExactSolution,
    ProblemSpec,
    Robin,
    builtin_problem,
    validate_problem,
)
from vdofrac.scheme import MarchOptions, MarchResult, SolutionField, march

__version__ = "0.1.0"

__all__ = [
    "Dirichlet",
    "DomainError",
    "ExactSolution",
    "GammaQuadrature",
    "Grid",
    "InvalidDistributionError",
    "KernelTable",
    "MarchOptions",
    "MarchResult",
    "OrderDistribution",
    "ProblemSpec",
    "Robin",
    "SolutionField",
    "build_kernel_table",
    "build_quadrature",
    "builtin_problem",
    "gamma_fn",
    "march",
    "thomas_solve",
    "validate_problem",
]
