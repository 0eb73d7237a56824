"""Uniform space-time grids, discrete inner products and a tridiagonal solver."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

__all__ = [
    "Grid",
    "GridError",
    "SingularSystemError",
    "TridiagonalSystem",
    "inner_product",
    "max_error",
    "norm_squared",
    "thomas_solve",
]

InnerProductKind = Literal["open", "half-open", "boundary-weighted"]


class GridError(ValueError):
    """Raised for inconsistent grids or grid functions."""


class SingularSystemError(ArithmeticError):
    """Raised when elimination hits a zero pivot."""


@dataclass(frozen=True)
class Grid:
    r"""Uniform grid :math:`x_i = i h`, :math:`t_j = j \tau` on :math:`[0, l] \times [0, T]`."""

    l: float
    T: float
    N: int
    j0: int

    def __post_init__(self) -> None:
        if self.N < 2:
            raise GridError(f"at least two space intervals required: N = {self.N}")
        if self.j0 < 1:
            raise GridError(f"at least one time step required: j0 = {self.j0}")
        if not (self.l > 0 and self.T > 0):
            raise GridError(f"domain must be non-degenerate: l = {self.l}, T = {self.T}")

    @classmethod
    def from_tau(cls, l: float, T: float, N: int, tau: float) -> Grid:
        """Build a grid from a time step that must divide *T*."""
        j0 = round(T / tau)
        if j0 < 1 or abs(j0 * tau - T) > 1.0e-9 * T:
            raise GridError(f"T = {T} is not an integer multiple of tau = {tau}")
        return cls(l=l, T=T, N=N, j0=j0)

    @property
    def h(self) -> float:
        return self.l / self.N

    @property
    def tau(self) -> float:
        return self.T / self.j0

    @property
    def x(self) -> np.ndarray:
        return self.h * np.arange(self.N + 1)

    @property
    def t(self) -> np.ndarray:
        return self.tau * np.arange(self.j0 + 1)

    @property
    def x_half(self) -> np.ndarray:
        """Midpoints :math:`x_{i - 1/2}` for ``i = 1, ..., N``."""
        return self.h * (np.arange(1, self.N + 1) - 0.5)

    def level_of(self, t: float, rtol: float = 1.0e-9) -> int:
        """Index of the time level equal to *t*; no interpolation is done."""
        j = round(t / self.tau)
        if not 0 <= j <= self.j0 or abs(j * self.tau - t) > rtol * max(abs(t), self.tau):
            raise GridError(f"t = {t} is not a level of the grid (tau = {self.tau})")
        return j


# {{{ inner products


def inner_product(y: np.ndarray, v: np.ndarray, h: float,
                  kind: InnerProductKind = "open") -> float:
    """Discrete inner products on a grid with ``N + 1`` nodes.

    * ``"open"``: :math:`(y, v) = \\sum_{i=1}^{N-1} y_i v_i h`,
    * ``"half-open"``: :math:`(y, v] = \\sum_{i=1}^{N} y_i v_i h`,
    * ``"boundary-weighted"``: :math:`[y, v] = (y, v) + h (y_0 v_0 + y_N v_N) / 2`.
    """
    y = np.asarray(y, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if y.shape != v.shape or y.ndim != 1 or y.size < 3:
        raise GridError(f"incompatible grid functions: {y.shape} and {v.shape}")

    if kind == "open":
        return h * float(np.dot(y[1:-1], v[1:-1]))
    elif kind == "half-open":
        return h * float(np.dot(y[1:], v[1:]))
    elif kind == "boundary-weighted":
        return h * (float(np.dot(y[1:-1], v[1:-1]))
                    + 0.5 * (y[0] * v[0] + y[-1] * v[-1]))
    else:
        raise ValueError(f"unknown inner product kind: {kind!r}")


def norm_squared(y: np.ndarray, h: float, kind: InnerProductKind = "open") -> float:
    return inner_product(y, y, h, kind)


# }}}


# {{{ tridiagonal systems


@dataclass
class TridiagonalSystem:
    """Row ``i`` reads ``lower[i] y[i-1] + diag[i] y[i] + upper[i] y[i+1] = rhs[i]``.

    ``lower[0]`` and ``upper[-1]`` are ignored.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray

    def __post_init__(self) -> None:
        n = self.diag.size
        if not (self.lower.size == self.upper.size == self.rhs.size == n):
            raise ValueError("tridiagonal coefficient vectors must have equal length")

    @property
    def n(self) -> int:
        return self.diag.size

    def to_dense(self) -> np.ndarray:
        A = np.diag(self.diag)
        if self.n > 1:
            A += np.diag(self.lower[1:], -1) + np.diag(self.upper[:-1], 1)
        return A

    def matvec(self, y: np.ndarray) -> np.ndarray:
        r = self.diag * y
        r[1:] += self.lower[1:] * y[:-1]
        r[:-1] += self.upper[:-1] * y[1:]
        return r

    def is_diagonally_dominant(self) -> bool:
        off = np.zeros(self.n)
        off[1:] += np.abs(self.lower[1:])
        off[:-1] += np.abs(self.upper[:-1])
        d = np.abs(self.diag)
        return bool(np.all(d >= off) and np.any(d > off))


def thomas_solve(system: TridiagonalSystem) -> np.ndarray:
    """Solve a tridiagonal system by elimination without pivoting.

    Stable for diagonally dominant systems, which is what the schemes assemble.
    """
    n = system.n
    a = system.lower.tolist()
    b = system.diag.tolist()
    c = system.upper.tolist()
    d = system.rhs.tolist()

    cp = [0.0] * n
    dp = [0.0] * n
    pivot = b[0]
    if pivot == 0.0:
        raise SingularSystemError("zero pivot in row 0")
    cp[0] = c[0] / pivot
    dp[0] = d[0] / pivot
    for i in range(1, n):
        pivot = b[i] - a[i] * cp[i - 1]
        if pivot == 0.0:
            raise SingularSystemError(f"zero pivot in row {i}")
        cp[i] = c[i] / pivot
        dp[i] = (d[i] - a[i] * dp[i - 1]) / pivot

    y = [0.0] * n
    y[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        y[i] = dp[i] - cp[i] * y[i + 1]

    return np.array(y)


# }}}


def max_error(y: np.ndarray, exact: Callable[[np.ndarray, float], np.ndarray],
              x: np.ndarray, t: float) -> float:
    """Maximum nodal error :math:`\\max_i |y_i - u(x_i, t)|`."""
    y = np.asarray(y, dtype=np.float64)
    u = np.broadcast_to(exact(np.asarray(x, dtype=np.float64), t), y.shape)
    err = float(np.max(np.abs(y - u)))
    if not math.isfinite(err):
        raise FloatingPointError("non-finite values in the error computation")
    return err
