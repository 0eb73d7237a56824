"""Discrete a priori (energy) estimates evaluated level by level.

For every level ``j + 1`` the ledger stores both sides of the estimate

.. math::

    E_{j+1} + G_{j+1} \\le F_{j+1} + U_{j+1},

where ``E`` is the weighted memory energy, ``G`` the accumulated gradient
(and, for Robin data, boundary) energy, ``F`` the accumulated forcing and
``U`` the contribution of the initial data. Since the kernel table already
holds the gamma-integrated weights, ``E`` and ``U`` are read off ``B``:

.. math::

    E_{j+1} = \\langle 1, \\sum_{s=0}^{j} B[\\cdot, j - s] (y^{s+1})^2 \\rangle,
    \\qquad
    U_{j+1} = \\langle u_0^2, \\sum_{k=0}^{j} B[\\cdot, k] \\rangle.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Literal

import numpy as np

from vdofrac.fracops import KernelTable
from vdofrac.mesh import Grid
from vdofrac.problems import Dirichlet, ProblemSpec, Robin
from vdofrac.scheme import SolutionField, scheme_residuals

__all__ = [
    "EnergyLedger",
    "InvalidProblemError",
    "NotApplicableError",
    "dirichlet_ledger",
    "error_ledger",
    "ledger_from_arrays",
    "robin_ledger",
]


class NotApplicableError(ValueError):
    """The estimate does not apply to the given data."""


class InvalidProblemError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyLedger:
    flavor: Literal["dirichlet", "robin"]
    levels: np.ndarray
    t: np.ndarray
    memory: np.ndarray
    gradient: np.ndarray
    forcing: np.ndarray
    initial: np.ndarray

    @property
    def lhs(self) -> np.ndarray:
        return self.memory + self.gradient

    @property
    def rhs(self) -> np.ndarray:
        return self.forcing + self.initial

    @property
    def slack(self) -> np.ndarray:
        return self.rhs - self.lhs

    def violations(self, rtol: float = 1.0e-10) -> int:
        """Number of levels with ``slack < -rtol * rhs``."""
        return int(np.count_nonzero(self.slack < -rtol * np.abs(self.rhs)))

    def rows(self):
        for j, t, lhs, rhs, slack in zip(self.levels, self.t, self.lhs, self.rhs, self.slack):
            yield int(j), float(t), float(lhs), float(rhs), float(slack)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["level", "t", "lhs", "rhs", "slack"])
        for j, t, lhs, rhs, slack in self.rows():
            writer.writerow([j, repr(t), repr(lhs), repr(rhs), repr(slack)])
        return buf.getvalue()


def _memory_energy(Y: np.ndarray, B: np.ndarray, weights: np.ndarray) -> np.ndarray:
    # E_{j+1} = sum_i w_i sum_{s<=j} B[i, j - s] (y_i^{s+1})^2
    squares = Y[1:] ** 2
    j0 = squares.shape[0]
    out = np.empty(j0)
    for j in range(j0):
        out[j] = np.einsum("is,si,i->", B[:, j::-1], squares[:j + 1], weights)
    return out


def ledger_from_arrays(flavor: Literal["dirichlet", "robin"],
                       grid: Grid,
                       Y: np.ndarray,
                       phi: np.ndarray,
                       kernel: KernelTable,
                       c1: float,
                       beta0: float | None = None,
                       mu_tilde: np.ndarray | None = None) -> EnergyLedger:
    """Assemble the ledger from raw arrays.

    :arg Y: grid functions on levels ``0, ..., j0``, shape ``(j0 + 1, N + 1)``.
    :arg phi: interior forcing on levels ``1, ..., j0``, shape ``(j0, N + 1)``;
        boundary entries are ignored.
    :arg mu_tilde: Robin boundary forcing on levels ``1, ..., j0``, shape
        ``(j0, 2)``.
    """
    h, tau, l = grid.h, grid.tau, grid.l
    j0 = grid.j0
    B = kernel.B[:, :j0]

    weights = np.full(grid.N + 1, h)
    if flavor == "dirichlet":
        weights[0] = weights[-1] = 0.0
    else:
        weights[0] = weights[-1] = 0.5 * h

    memory = _memory_energy(Y, B, weights)
    initial = np.cumsum(B, axis=1).T @ (weights * Y[0] ** 2)

    grad = np.sum(np.diff(Y[1:], axis=1) ** 2, axis=1) / h
    phi_norm = h * np.sum(phi[:, 1:-1] ** 2, axis=1)

    if flavor == "dirichlet":
        gradient = c1 * tau * np.cumsum(grad)
        forcing = l**2 / (2.0 * c1) * tau * np.cumsum(phi_norm)
    else:
        if beta0 is None or beta0 <= 0.0:
            raise InvalidProblemError(f"beta0 must be positive (got {beta0})")
        if mu_tilde is None:
            raise ValueError("Robin ledger requires the boundary forcing")
        gamma1 = min(c1, beta0)
        delta1 = max(1.0 + l, l**2)
        boundary = Y[1:, 0] ** 2 + Y[1:, -1] ** 2
        gradient = gamma1 * tau * np.cumsum(grad + boundary)
        data = phi_norm + mu_tilde[:, 0] ** 2 + mu_tilde[:, 1] ** 2
        forcing = delta1 / gamma1 * tau * np.cumsum(data)

    levels = np.arange(1, j0 + 1)
    ledger = EnergyLedger(flavor=flavor, levels=levels, t=tau * levels,
                          memory=memory, gradient=gradient,
                          forcing=forcing, initial=initial)
    assert np.all(ledger.memory >= 0.0) and np.all(ledger.gradient >= 0.0)
    return ledger


def _sample(func, x, t) -> np.ndarray:
    return np.broadcast_to(func(x, t), x.shape).astype(np.float64)


def dirichlet_ledger(field: SolutionField, problem: ProblemSpec,
                     kernel: KernelTable) -> EnergyLedger:
    """Energy ledger of a Dirichlet solution with homogeneous boundary data."""
    bc = problem.bc
    if not isinstance(bc, Dirichlet):
        raise NotApplicableError("the Dirichlet ledger needs Dirichlet data")

    grid = field.grid
    t = grid.t[1:]
    mu = np.array([[bc.mu1(tj), bc.mu2(tj)] for tj in t], dtype=np.float64)
    if np.any(mu != 0.0):
        raise NotApplicableError(
            "the estimate holds for homogeneous boundary data; "
            "use error_ledger for inhomogeneous problems")

    phi = np.array([_sample(problem.f, grid.x, tj) for tj in t])
    return ledger_from_arrays("dirichlet", grid, field.levels, phi, kernel, problem.c1)


def robin_ledger(field: SolutionField, problem: ProblemSpec,
                 kernel: KernelTable) -> EnergyLedger:
    """Energy ledger of a Robin solution."""
    bc = problem.bc
    if not isinstance(bc, Robin):
        raise NotApplicableError("the Robin ledger needs Robin data")
    if problem.beta0 is None or problem.beta0 <= 0.0:
        raise InvalidProblemError(f"beta0 must be positive (got {problem.beta0})")

    grid = field.grid
    h = grid.h
    t = grid.t[1:]
    phi = np.array([_sample(problem.f, grid.x, tj) for tj in t])
    mu_tilde = np.array([
        [bc.mu1(tj) + 0.5 * h * phi[j, 0], bc.mu2(tj) + 0.5 * h * phi[j, -1]]
        for j, tj in enumerate(t)], dtype=np.float64)

    return ledger_from_arrays("robin", grid, field.levels, phi, kernel,
                              problem.c1, beta0=problem.beta0, mu_tilde=mu_tilde)


def error_ledger(field: SolutionField, problem: ProblemSpec,
                 kernel: KernelTable) -> EnergyLedger:
    """Ledger of the error ``z = y - u`` against the exact solution.

    The error solves the scheme with zero initial data and homogeneous
    boundary data, forced by the truncation error of the scheme on ``u``.
    """
    if problem.exact is None:
        raise NotApplicableError("the error ledger needs an exact solution")

    grid = field.grid
    U = np.array([_sample(problem.exact, grid.x, tj) for tj in grid.t])
    Z = field.levels - U

    # truncation error: psi = -(scheme residual of the exact solution)
    psi = -np.array([scheme_residuals(U, grid, problem, kernel, j)
                     for j in range(1, grid.j0 + 1)])

    if isinstance(problem.bc, Robin):
        mu_tilde = 0.5 * grid.h * psi[:, [0, -1]]
        return ledger_from_arrays("robin", grid, Z, psi, kernel, problem.c1,
                                  beta0=problem.beta0, mu_tilde=mu_tilde)

    Z[1:, 0] = 0.0
    Z[1:, -1] = 0.0
    return ledger_from_arrays("dirichlet", grid, Z, psi, kernel, problem.c1)
