"""Special functions, L1 Caputo weights and the distributed-order kernel.

The distributed operator at node ``x_i`` and level ``j + 1`` is

.. math::

    P\\Delta v = \\frac{1}{\\tau} \\sum_{s=0}^{j} B_i[j - s] (v^{s+1} - v^s),

where ``B_i[k]`` integrates the single-term L1 weights over the distribution
variable ``gamma`` and sums them over the ``m`` terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "DomainError",
    "GammaQuadrature",
    "InvalidDistributionError",
    "KernelTable",
    "OrderDistribution",
    "apply_distributed_l1",
    "build_kernel_table",
    "build_quadrature",
    "caputo_exact_power",
    "gamma_fn",
    "l1_increment_diffs",
    "l1_weights",
    "lemma2_gap",
    "lemma2_single_term_bound",
    "stable_powdiff_log",
]


class DomainError(ValueError):
    """Raised when a function is evaluated outside of its domain."""


class InvalidDistributionError(ValueError):
    """Raised when an order distribution violates its constraints."""


# {{{ gamma function

# Godfrey's coefficients for g = 607/128
_LANCZOS_G = 607.0 / 128.0
_LANCZOS_COEFFS = np.array([
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
])
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _lanczos(x: np.ndarray) -> np.ndarray:
    # valid for x >= 0.5
    z = x - 1.0
    series = np.full_like(z, _LANCZOS_COEFFS[0])
    for i in range(1, _LANCZOS_COEFFS.size):
        series += _LANCZOS_COEFFS[i] / (z + i)

    t = z + _LANCZOS_G + 0.5
    return _SQRT_2PI * t ** (z + 0.5) * np.exp(-t) * series


def gamma_fn(x):
    """Evaluate the Gamma function for positive arguments.

    Uses a Lanczos approximation with the reflection formula below ``0.5``.
    The relative error is about ``1e-15`` on ``(0, 30)``.

    :arg x: a positive scalar or array.
    :returns: a float if *x* is a scalar, otherwise an array of the same shape.
    """
    xa = np.asarray(x, dtype=np.float64)
    if np.any(~(xa > 0.0)):
        raise DomainError(f"gamma_fn requires x > 0 (got min {np.min(xa)!r})")

    small = xa < 0.5
    result = np.empty_like(xa)
    if np.any(~small):
        result[~small] = _lanczos(xa[~small])
    if np.any(small):
        xs = xa[small]
        result[small] = np.pi / (np.sin(np.pi * xs) * _lanczos(1.0 - xs))

    if result.ndim == 0:
        return float(result)
    return result


# }}}


def stable_powdiff_log(t, a, b):
    """Evaluate :math:`(t^a - t^b) / \\ln t` for :math:`t \\in (0, 1]`.

    The removable singularity at ``t = 1`` is handled by writing the quotient
    as :math:`t^b \\, \\mathrm{expm1}((a - b) \\ln t) / \\ln t`, which tends to
    ``a - b`` as ``t -> 1``. Arguments broadcast against each other.
    """
    t = np.asarray(t, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.any(~(t > 0.0)):
        raise DomainError("stable_powdiff_log requires t > 0")

    lnt = np.log(t)
    c = a - b
    z = c * lnt
    near = np.abs(lnt) < 1.0e-6
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = t**b * np.expm1(z) / lnt
    # phi(z) = expm1(z) / z, series for small z
    phi = 1.0 + z / 2.0 + z * z / 6.0
    series = c * t**b * phi
    result = np.where(near, series, direct)

    if result.ndim == 0:
        return float(result)
    return result


# {{{ quadrature in gamma


@dataclass(frozen=True)
class GammaQuadrature:
    """Gauss-Legendre rule on :math:`[\\alpha, \\beta]`."""

    alpha: float
    beta: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def npoints(self) -> int:
        return self.nodes.size

    def integrate(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        """Integrate *values* sampled at :attr:`nodes` along *axis*."""
        return np.tensordot(values, self.weights, axes=([axis], [0]))

    def describe(self) -> dict:
        return {
            "rule": "gauss-legendre",
            "alpha": self.alpha,
            "beta": self.beta,
            "npoints": self.npoints,
        }


def build_quadrature(alpha: float, beta: float, npoints: int = 64) -> GammaQuadrature:
    """Construct a Gauss-Legendre rule with *npoints* nodes on ``[alpha, beta]``.

    The rule is exact for polynomials of degree ``2 * npoints - 1``.
    """
    if not alpha < beta:
        raise ValueError(f"expected alpha < beta (got {alpha}, {beta})")
    if npoints < 2:
        raise ValueError(f"at least two quadrature nodes required (got {npoints})")

    xi, wi = np.polynomial.legendre.leggauss(npoints)
    half = 0.5 * (beta - alpha)
    nodes = alpha + half * (xi + 1.0)
    weights = half * wi
    nodes.setflags(write=False)
    weights.setflags(write=False)

    return GammaQuadrature(alpha=float(alpha), beta=float(beta),
                           nodes=nodes, weights=weights)


# }}}


# {{{ order distribution

DistributionFunction = Callable[[int, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class OrderDistribution:
    """Orders :math:`\\theta_r(x, \\gamma)` and weights :math:`\\omega_r(x, \\gamma)`.

    Both *theta* and *omega* are called as ``f(r, x, gamma)`` with a 1-based
    term index ``r`` and must broadcast over array arguments.
    """

    m: int
    alpha: float
    beta: float
    theta: DistributionFunction
    omega: DistributionFunction

    def __post_init__(self) -> None:
        if self.m < 1:
            raise InvalidDistributionError(f"term count must be positive: {self.m}")
        if not self.alpha < self.beta:
            raise InvalidDistributionError(
                f"expected alpha < beta (got {self.alpha}, {self.beta})")

    def sample(self, x, gamma) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate all terms at broadcast ``(x, gamma)``.

        :returns: a tuple ``(theta, omega)`` with a leading axis of size ``m``.
        """
        x = np.asarray(x, dtype=np.float64)
        gamma = np.asarray(gamma, dtype=np.float64)
        shape = np.broadcast_shapes(x.shape, gamma.shape)

        theta = np.empty((self.m, *shape))
        omega = np.empty((self.m, *shape))
        for r in range(1, self.m + 1):
            theta[r - 1] = np.broadcast_to(self.theta(r, x, gamma), shape)
            omega[r - 1] = np.broadcast_to(self.omega(r, x, gamma), shape)

        return theta, omega

    def total_weight(self, x, quad: GammaQuadrature) -> np.ndarray:
        """Quadrature of :math:`\\sum_r \\omega_r(x, \\cdot)` over the gamma range."""
        x = np.asarray(x, dtype=np.float64)
        _, omega = self.sample(x[..., None], quad.nodes)
        return quad.integrate(omega.sum(axis=0))

    def check(self, x, quad: GammaQuadrature) -> list[str]:
        """Return a list of constraint violations at the nodes *x*."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        theta, omega = self.sample(x[:, None], quad.nodes)

        problems = []
        if not np.all(np.isfinite(theta)) or not np.all(np.isfinite(omega)):
            problems.append("non-finite order or weight")
        if np.any(theta < 0.0) or np.any(theta >= 1.0):
            problems.append(
                f"order outside [0, 1): range [{theta.min():.6g}, {theta.max():.6g}]")
        if np.any(omega < 0.0):
            problems.append(f"negative weight: min {omega.min():.6g}")

        mass = quad.integrate(omega.sum(axis=0))
        bad = np.flatnonzero(~(mass > 0.0))
        if bad.size:
            problems.append(f"non-positive total weight at x = {x[bad].tolist()}")

        return problems

    def theta_max(self, l: float, nx: int = 201, ngamma: int = 201) -> float:
        """Largest order attained on a dense uniform sample of ``[0, l] x [alpha, beta]``."""
        x = np.linspace(0.0, l, nx)
        g = np.linspace(self.alpha, self.beta, ngamma)
        theta, _ = self.sample(x[:, None], g[None, :])
        return float(theta.max())


# }}}


# {{{ L1 weights


def l1_increment_diffs(k: np.ndarray, p) -> np.ndarray:
    """Evaluate :math:`(k + 1)^p - k^p` without cancellation for large *k*.

    :arg k: non-negative integer lags.
    :arg p: exponents in ``(0, 1]``, broadcast against *k*.
    """
    k = np.asarray(k, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    k, p = np.broadcast_arrays(k, p)

    out = np.ones(k.shape)
    pos = k > 0
    kp = k[pos]
    pp = p[pos]
    out[pos] = kp**pp * np.expm1(pp * np.log1p(1.0 / kp))
    return out


def l1_weights(theta: float, tau: float, j: int) -> np.ndarray:
    """Single-term L1 weights for lags ``0, ..., j``.

    The weight for lag ``k`` multiplies the increment ``u^{s+1} - u^s`` with
    ``k = j - s`` in the L1 approximation of the Caputo derivative at
    ``t_{j+1}``.
    """
    if tau <= 0.0:
        raise ValueError(f"time step must be positive: {tau}")
    if j < 0:
        raise ValueError(f"level index must be non-negative: {j}")
    if not 0.0 <= theta < 1.0:
        raise DomainError(f"order must be in [0, 1): {theta}")

    k = np.arange(j + 1)
    return l1_increment_diffs(k, 1.0 - theta) * tau**-theta / gamma_fn(2.0 - theta)


# }}}


# {{{ kernel table


@dataclass(frozen=True)
class KernelTable:
    """Distributed L1 weights ``B[i, k]`` per space node and time lag.

    .. attribute:: B

        read-only array of shape ``(nnodes, j0)``; the lag ``k`` weight
        already contains the factor :math:`\\tau^{1 - \\theta}`, so that
        :math:`P\\Delta v = \\tau^{-1} \\sum_s B[i, j - s] (v^{s+1} - v^s)`.
    """

    B: np.ndarray
    tau: float
    j0: int
    built_with: dict = field(default_factory=dict)

    @property
    def nnodes(self) -> int:
        return self.B.shape[0]

    def cumulative(self) -> np.ndarray:
        """Partial sums :math:`\\sum_{k \\le n} B[i, k]`.

        This equals the quadrature of
        :math:`\\sum_r \\omega_r t_{n+1}^{1-\\theta_r} / \\Gamma(2 - \\theta_r)`.
        """
        return np.cumsum(self.B, axis=1)

    def perturbed(self, lag: int = 1, factor: float = 3.0) -> KernelTable:
        """Copy with one lag column scaled; only used for fault injection."""
        B = self.B.copy()
        B[:, lag] *= factor
        B.setflags(write=False)
        return KernelTable(B=B, tau=self.tau, j0=self.j0,
                           built_with={**self.built_with, "perturbed": (lag, factor)})


def _kernel_rows(theta: np.ndarray, omega: np.ndarray,
                 weights: np.ndarray, tau: float, j0: int) -> np.ndarray:
    # theta, omega: (m, P) at one node
    p = 1.0 - theta
    scale = weights * omega * tau**p / gamma_fn(2.0 - theta)
    k = np.arange(j0, dtype=np.float64)
    diffs = l1_increment_diffs(k[:, None, None], p[None, :, :])
    return np.einsum("kmp,mp->k", diffs, scale)


def build_kernel_table(dist: OrderDistribution,
                       x_nodes: np.ndarray,
                       tau: float,
                       j0: int,
                       quad: GammaQuadrature) -> KernelTable:
    """Integrate the single-term L1 weights over gamma at every node.

    :arg x_nodes: spatial nodes at which the orders and weights are sampled.
    :arg j0: number of time steps; lags ``0, ..., j0 - 1`` are tabulated.
    """
    if tau <= 0.0:
        raise ValueError(f"time step must be positive: {tau}")
    if j0 < 1:
        raise ValueError(f"at least one time step required: {j0}")

    x_nodes = np.asarray(x_nodes, dtype=np.float64)
    problems = dist.check(x_nodes, quad)
    if problems:
        raise InvalidDistributionError("; ".join(problems))

    B = np.empty((x_nodes.size, j0))
    for i, xi in enumerate(x_nodes):
        theta, omega = dist.sample(xi, quad.nodes)
        B[i] = _kernel_rows(theta, omega, quad.weights, tau, j0)

    B.setflags(write=False)
    return KernelTable(B=B, tau=float(tau), j0=int(j0), built_with=quad.describe())


def apply_distributed_l1(row: np.ndarray, history: np.ndarray, tau: float) -> float:
    """Evaluate the discrete distributed operator at the last history level.

    :arg row: lag weights ``B[i, :]`` for a single node.
    :arg history: values ``v^0, ..., v^{j+1}``.
    """
    row = np.asarray(row, dtype=np.float64)
    history = np.asarray(history, dtype=np.float64)
    if history.ndim != 1 or history.size < 2:
        raise ValueError("history must be a 1D array with at least two levels")

    j = history.size - 2
    if row.size < j + 1:
        raise ValueError(
            f"kernel row has {row.size} lags, but {j + 1} are required")

    increments = np.diff(history)
    return float(np.dot(row[j::-1], increments)) / tau


def lemma2_gap(row: np.ndarray, history: np.ndarray, tau: float) -> float:
    """Compute :math:`v^{j+1} P\\Delta v - \\frac{1}{2} P\\Delta (v^2)`.

    The gap is non-negative for any history whenever the lag weights in
    *row* are non-negative and non-increasing.
    """
    history = np.asarray(history, dtype=np.float64)
    lhs = history[-1] * apply_distributed_l1(row, history, tau)
    return lhs - 0.5 * apply_distributed_l1(row, history**2, tau)


def lemma2_single_term_bound(theta: float, history: np.ndarray, tau: float) -> float:
    """Lower bound on the single-term gap, :math:`\\tau^\\theta \\Gamma(2 - \\theta) (\\Delta v)^2 / 2`."""
    history = np.asarray(history, dtype=np.float64)
    w = l1_weights(theta, tau, history.size - 2)
    dv = float(np.dot(w[::-1], np.diff(history)))
    return 0.5 * tau**theta * gamma_fn(2.0 - theta) * dv**2


def caputo_exact_power(p: float, theta, t):
    """Caputo derivative of order *theta* of :math:`t^p` for ``p = 0`` or ``p >= 1``.

    *theta* and *t* broadcast against each other.
    """
    theta = np.asarray(theta, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(theta < 0.0) or np.any(theta >= 1.0):
        raise DomainError("order must be in [0, 1)")
    if p != 0 and p < 1:
        raise DomainError(f"power must be 0 or at least 1: {p!r}")

    if p == 0:
        result = np.zeros(np.broadcast_shapes(theta.shape, t.shape))
    else:
        result = gamma_fn(p + 1.0) / gamma_fn(p + 1.0 - theta) * t ** (p - theta)

    if np.ndim(result) == 0:
        return float(result)
    return result
