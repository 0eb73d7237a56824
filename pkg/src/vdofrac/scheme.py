"""Implicit L1 difference schemes for the Dirichlet and Robin problems.

Each time level needs one tridiagonal solve. The right-hand side carries
the full L1 memory, so the complete history ``y^0, ..., y^j`` is retained
(``O(N j0)`` storage, ``O(N j0^2)`` work for the history sums).
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from vdofrac.fracops import (
    KernelTable,
    apply_distributed_l1,
    build_kernel_table,
    build_quadrature,
)
from vdofrac.mesh import Grid, TridiagonalSystem, thomas_solve
from vdofrac.problems import Dirichlet, ProblemSpec, Robin

logger = logging.getLogger(__name__)

__all__ = [
    "MarchOptions",
    "MarchResult",
    "SchemeError",
    "SolutionField",
    "StepReport",
    "assemble_dirichlet_system",
    "assemble_robin_system",
    "assemble_system",
    "build_scheme_kernel",
    "history_sum",
    "march",
    "residual_norm",
    "scheme_residuals",
]


class SchemeError(RuntimeError):
    """A failure while assembling or solving a time level."""

    def __init__(self, message: str, level: int | None = None) -> None:
        self.level = level
        prefix = f"level {level}: " if level is not None else ""
        super().__init__(prefix + message)


@dataclass
class SolutionField:
    """Grid functions ``y^0, ..., y^{j0}`` stored as rows of :attr:`levels`."""

    grid: Grid
    levels: np.ndarray

    @classmethod
    def initial(cls, grid: Grid, problem: ProblemSpec) -> SolutionField:
        levels = np.zeros((grid.j0 + 1, grid.N + 1))
        levels[0] = np.broadcast_to(problem.u0(grid.x), grid.x.shape)
        return cls(grid=grid, levels=levels)

    def at_time(self, t: float) -> np.ndarray:
        return self.levels[self.grid.level_of(t)]


@dataclass(frozen=True)
class StepReport:
    level: int
    residual: float
    wall_time: float
    ledger_entry: int | None = None


@dataclass
class MarchOptions:
    """
    :attr quad_nodes: Gauss-Legendre nodes for the gamma integral.
    :attr workers: threads used for the history sums across space nodes.
    """

    quad_nodes: int = 64
    workers: int = 1


@dataclass
class MarchResult:
    field: SolutionField
    reports: list[StepReport]
    kernel: KernelTable
    timings: dict = field(default_factory=dict)


def build_scheme_kernel(problem: ProblemSpec, grid: Grid,
                        quad_nodes: int = 64) -> KernelTable:
    quad = build_quadrature(problem.dist.alpha, problem.dist.beta, quad_nodes)
    return build_kernel_table(problem.dist, grid.x, grid.tau, grid.j0, quad)


# {{{ history sums


def history_sum(B: np.ndarray, increments: np.ndarray, j: int,
                executor: ThreadPoolExecutor | None = None,
                chunks: int = 1) -> np.ndarray:
    """Memory part of the L1 sum at level ``j + 1``.

    :arg increments: rows ``y^{s+1} - y^s`` for ``s = 0, ..., j - 1`` (at least).
    :returns: :math:`\\sum_{s=0}^{j-1} B[i, j - s] (y_i^{s+1} - y_i^s)` per node.
    """
    if j == 0:
        return np.zeros(B.shape[0])

    lags = B[:, j:0:-1]
    incr = increments[:j]

    if executor is None or chunks <= 1:
        return np.einsum("is,si->i", lags, incr)

    bounds = np.linspace(0, B.shape[0], chunks + 1).astype(int)

    def part(k):
        lo, hi = bounds[k], bounds[k + 1]
        return np.einsum("is,si->i", lags[lo:hi], incr[:, lo:hi])

    return np.concatenate(list(executor.map(part, range(chunks))))


def _memory_from_field(field: SolutionField, kernel: KernelTable, level: int) -> np.ndarray:
    increments = np.diff(field.levels[:level], axis=0)
    return history_sum(kernel.B, increments, level - 1)


# }}}


# {{{ assembly


def _check_level(level: int, field: SolutionField, kernel: KernelTable) -> None:
    if not 1 <= level <= field.grid.j0:
        raise SchemeError(f"level outside 1..{field.grid.j0}", level)
    if kernel.j0 < level or kernel.nnodes != field.grid.N + 1:
        raise SchemeError(
            f"kernel table ({kernel.nnodes} nodes, {kernel.j0} lags) does not "
            f"match the grid ({field.grid.N + 1} nodes)", level)
    if abs(kernel.tau - field.grid.tau) > 1.0e-12 * field.grid.tau:
        raise SchemeError("kernel table was built for a different time step", level)


def _coefficients(problem: ProblemSpec, grid: Grid, t: float):
    x = grid.x
    a = np.broadcast_to(problem.k(grid.x_half, t), (grid.N,)).astype(np.float64)
    d = np.broadcast_to(problem.q(x, t), x.shape).astype(np.float64)
    phi = np.broadcast_to(problem.f(x, t), x.shape).astype(np.float64)
    return a, d, phi


def assemble_dirichlet_system(level: int, field: SolutionField, problem: ProblemSpec,
                              kernel: KernelTable,
                              memory: np.ndarray | None = None) -> TridiagonalSystem:
    """Tridiagonal system for the interior unknowns ``y_1, ..., y_{N-1}`` at *level*.

    Boundary values at the new level are moved to the right-hand side.
    """
    _check_level(level, field, kernel)
    bc = problem.bc
    if not isinstance(bc, Dirichlet):
        raise SchemeError("Dirichlet assembly requires Dirichlet data", level)

    grid = field.grid
    h, tau = grid.h, grid.tau
    t = level * tau
    if memory is None:
        memory = _memory_from_field(field, kernel, level)

    a, d, phi = _coefficients(problem, grid, t)
    b0 = kernel.B[:, 0] / tau
    prev = field.levels[level - 1]
    h2 = h * h

    # a[i - 1] is a_i = k(x_{i - 1/2}); interior rows i = 1..N-1
    a_left = a[:-1]
    a_right = a[1:]
    diag = b0[1:-1] + (a_left + a_right) / h2 + d[1:-1]
    if np.any(~(diag > 0.0)):
        raise SchemeError("non-positive diagonal entry", level)

    lower = -a_left / h2
    upper = -a_right / h2
    rhs = phi[1:-1] + b0[1:-1] * prev[1:-1] - memory[1:-1] / tau
    rhs[0] += a_left[0] / h2 * float(bc.mu1(t))
    rhs[-1] += a_right[-1] / h2 * float(bc.mu2(t))

    lower[0] = 0.0
    upper[-1] = 0.0
    return TridiagonalSystem(lower=lower, diag=diag, upper=upper, rhs=rhs)


def assemble_robin_system(level: int, field: SolutionField, problem: ProblemSpec,
                          kernel: KernelTable,
                          memory: np.ndarray | None = None) -> TridiagonalSystem:
    """Tridiagonal system for all unknowns ``y_0, ..., y_N`` at *level*."""
    _check_level(level, field, kernel)
    bc = problem.bc
    if not isinstance(bc, Robin):
        raise SchemeError("Robin assembly requires Robin data", level)

    grid = field.grid
    h, tau = grid.h, grid.tau
    t = level * tau
    if memory is None:
        memory = _memory_from_field(field, kernel, level)

    a, d, phi = _coefficients(problem, grid, t)
    b0 = kernel.B[:, 0] / tau
    prev = field.levels[level - 1]
    h2 = h * h
    n = grid.N + 1

    lower = np.zeros(n)
    upper = np.zeros(n)
    diag = np.empty(n)
    rhs = b0 * prev - memory / tau

    diag[1:-1] = b0[1:-1] + (a[:-1] + a[1:]) / h2 + d[1:-1]
    lower[1:-1] = -a[:-1] / h2
    upper[1:-1] = -a[1:] / h2
    rhs[1:-1] += phi[1:-1]

    beta1 = float(bc.beta1(t)) + 0.5 * h * d[0]
    beta2 = float(bc.beta2(t)) + 0.5 * h * d[-1]
    mu1 = float(bc.mu1(t)) + 0.5 * h * phi[0]
    mu2 = float(bc.mu2(t)) + 0.5 * h * phi[-1]

    diag[0] = b0[0] + 2.0 * a[0] / h2 + 2.0 * beta1 / h
    upper[0] = -2.0 * a[0] / h2
    rhs[0] += 2.0 * mu1 / h

    diag[-1] = b0[-1] + 2.0 * a[-1] / h2 + 2.0 * beta2 / h
    lower[-1] = -2.0 * a[-1] / h2
    rhs[-1] += 2.0 * mu2 / h

    if np.any(~(diag > 0.0)):
        raise SchemeError("non-positive diagonal entry", level)

    return TridiagonalSystem(lower=lower, diag=diag, upper=upper, rhs=rhs)


def assemble_system(level, field, problem, kernel, memory=None) -> TridiagonalSystem:
    if isinstance(problem.bc, Robin):
        return assemble_robin_system(level, field, problem, kernel, memory)
    return assemble_dirichlet_system(level, field, problem, kernel, memory)


# }}}


# {{{ marching


def march(problem: ProblemSpec, grid: Grid,
          options: MarchOptions | None = None,
          kernel: KernelTable | None = None) -> MarchResult:
    """Advance the scheme from ``y^0 = u0`` through all ``j0`` levels."""
    if options is None:
        options = MarchOptions()

    t_start = time.perf_counter()
    if kernel is None:
        kernel = build_scheme_kernel(problem, grid, options.quad_nodes)
    t_kernel = time.perf_counter() - t_start

    field = SolutionField.initial(grid, problem)
    increments = np.empty((grid.j0, grid.N + 1))
    robin = isinstance(problem.bc, Robin)
    reports = []

    executor = ThreadPoolExecutor(options.workers) if options.workers > 1 else None
    try:
        for level in range(1, grid.j0 + 1):
            tic = time.perf_counter()
            t = level * grid.tau
            memory = history_sum(kernel.B, increments, level - 1,
                                 executor=executor, chunks=options.workers)
            try:
                system = assemble_system(level, field, problem, kernel, memory)
                y = thomas_solve(system)
            except SchemeError:
                raise
            except Exception as exc:
                raise SchemeError(str(exc), level) from exc

            if not np.all(np.isfinite(y)):
                raise SchemeError("non-finite solution values", level)

            residual = float(np.max(np.abs(system.matvec(y) - system.rhs)))
            new = field.levels[level]
            if robin:
                new[:] = y
            else:
                new[0] = float(problem.bc.mu1(t))
                new[-1] = float(problem.bc.mu2(t))
                new[1:-1] = y

            increments[level - 1] = new - field.levels[level - 1]
            reports.append(StepReport(level=level, residual=residual,
                                      wall_time=time.perf_counter() - tic))
    finally:
        if executor is not None:
            executor.shutdown()

    timings = {"kernel": t_kernel, "total": time.perf_counter() - t_start}
    logger.debug("marched %d levels in %.3fs", grid.j0, timings["total"])
    return MarchResult(field=field, reports=reports, kernel=kernel, timings=timings)


# }}}


def scheme_residuals(levels: np.ndarray, grid: Grid, problem: ProblemSpec,
                     kernel: KernelTable, level: int) -> np.ndarray:
    """Pointwise residuals of the scheme equations at *level* for the history *levels*.

    The equations are evaluated from their pointwise definitions (distributed
    L1 operator, flux differences, boundary relations) without reusing the
    assembled systems. For Dirichlet data the boundary entries are
    ``y_0 - mu1`` and ``y_N - mu2``.
    """
    h, tau = grid.h, grid.tau
    t = level * tau
    x = grid.x
    y = levels[level]
    history = levels[:level + 1]

    operator = np.array([apply_distributed_l1(kernel.B[i], history[:, i], tau)
                         for i in range(grid.N + 1)])

    k_half = np.broadcast_to(problem.k(grid.x_half, t), (grid.N,))
    flux = k_half * np.diff(y) / h
    q = np.broadcast_to(problem.q(x, t), x.shape)
    f = np.broadcast_to(problem.f(x, t), x.shape)

    res = np.empty(grid.N + 1)
    res[1:-1] = operator[1:-1] - (np.diff(flux) / h - q[1:-1] * y[1:-1]) - f[1:-1]

    bc = problem.bc
    if isinstance(bc, Robin):
        beta1 = bc.beta1(t) + 0.5 * h * q[0]
        beta2 = bc.beta2(t) + 0.5 * h * q[-1]
        mu1 = bc.mu1(t) + 0.5 * h * f[0]
        mu2 = bc.mu2(t) + 0.5 * h * f[-1]
        res[0] = operator[0] - (flux[0] - beta1 * y[0]) / (0.5 * h) - 2.0 * mu1 / h
        res[-1] = operator[-1] - (-flux[-1] - beta2 * y[-1]) / (0.5 * h) - 2.0 * mu2 / h
    else:
        res[0] = y[0] - bc.mu1(t)
        res[-1] = y[-1] - bc.mu2(t)

    return res


def residual_norm(field: SolutionField, problem: ProblemSpec,
                  kernel: KernelTable, level: int) -> float:
    """Maximum residual of the scheme equations at *level*, see :func:`scheme_residuals`."""
    res = scheme_residuals(field.levels, field.grid, problem, kernel, level)
    return float(np.max(np.abs(res)))
