"""Problem definitions, the two manufactured test problems and validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from vdofrac.fracops import (
    OrderDistribution,
    build_quadrature,
    caputo_exact_power,
    DomainError,
    gamma_fn,
    stable_powdiff_log,
)
from vdofrac.mesh import Grid

__all__ = [
    "Dirichlet",
    "ExactSolution",
    "ProblemSpec",
    "Robin",
    "ValidationReport",
    "builtin_problem",
    "builtin_test1",
    "builtin_test2",
    "caputo_numeric",
    "mms_source",
    "robin_boundary_data",
    "validate_problem",
]

SpaceTimeFunction = Callable[[np.ndarray, float], np.ndarray]
TimeFunction = Callable[[float], float]


@dataclass(frozen=True)
class Dirichlet:
    """Prescribed values ``u(0, t) = mu1(t)`` and ``u(l, t) = mu2(t)``."""

    mu1: TimeFunction
    mu2: TimeFunction


@dataclass(frozen=True)
class Robin:
    """``k u_x = beta1 u - mu1`` at ``x = 0`` and ``-k u_x = beta2 u - mu2`` at ``x = l``."""

    beta1: TimeFunction
    beta2: TimeFunction
    mu1: TimeFunction
    mu2: TimeFunction


BoundaryCondition = Union[Dirichlet, Robin]


@dataclass(frozen=True)
class ExactSolution:
    """An exact solution ``u(x, t)``.

    If the solution separates as ``space(x) * sum(c * t**p)``, the pairs
    ``(p, c)`` go in *time_powers* and the Caputo derivatives are evaluated
    in closed form. Otherwise a numerical Caputo derivative is used.
    """

    u: SpaceTimeFunction
    note: str = ""
    space: Callable[[np.ndarray], np.ndarray] | None = None
    time_powers: tuple[tuple[float, float], ...] = ()

    def __call__(self, x, t):
        return self.u(x, t)

    @property
    def is_separable(self) -> bool:
        return self.space is not None and bool(self.time_powers)


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients and data of a boundary value problem on ``[0, l] x [0, T]``.

    :attr c1: declared lower bound of ``k``.
    :attr beta0: declared lower bound of the Robin coefficients.
    :attr theta_max: declared maximum order, used to couple ``tau`` to ``h``
        in refinement studies.
    """

    l: float
    T: float
    dist: OrderDistribution
    k: SpaceTimeFunction
    q: SpaceTimeFunction
    f: SpaceTimeFunction
    u0: Callable[[np.ndarray], np.ndarray]
    bc: BoundaryCondition
    c1: float
    beta0: float | None = None
    exact: ExactSolution | None = None
    theta_max: float | None = None
    name: str = "custom"

    @property
    def is_robin(self) -> bool:
        return isinstance(self.bc, Robin)


# {{{ built-in problems


def _test1_theta(r, x, g):
    return (1.0 + (r * x + 1.0) * g - np.cos(r * x * g)) / (r + 4.0)


def _test1_omega(r, x, g):
    theta = _test1_theta(r, x, g)
    return (r * x + 1.0 + r * x * np.sin(r * x * g)) * gamma_fn(3.0 - theta) / (2.0 * r + 8.0)


def builtin_test1() -> ProblemSpec:
    """Dirichlet problem with exact solution ``(x^3 + x + 1)(t^2 + 1)``, ``m = 5``."""

    def space(x):
        return x**3 + x + 1.0

    def f(x, t):
        x = np.asarray(x, dtype=np.float64)
        memory = np.zeros_like(x)
        for r in range(1, 6):
            memory += stable_powdiff_log(
                t, 2.0 - _test1_theta(r, x, 0.0), 2.0 - _test1_theta(r, x, 1.0))
        return (memory + (t**2 + 1.0) * (1.0 - np.sin(x * t))) * space(x)

    exact = ExactSolution(
        u=lambda x, t: space(x) * (t**2 + 1.0),
        note="(x^3 + x + 1)(t^2 + 1)",
        space=space,
        time_powers=((0.0, 1.0), (2.0, 1.0)),
    )

    return ProblemSpec(
        l=1.0, T=1.0,
        dist=OrderDistribution(m=5, alpha=0.0, beta=1.0,
                               theta=_test1_theta, omega=_test1_omega),
        k=lambda x, t: (8.0 + np.sin(t)) / (3.0 * x**2 + 1.0),
        q=lambda x, t: 1.0 - np.sin(x * t),
        f=f,
        u0=space,
        bc=Dirichlet(mu1=lambda t: t**2 + 1.0, mu2=lambda t: 3.0 * (t**2 + 1.0)),
        c1=2.0,
        exact=exact,
        theta_max=0.856,
        name="test1",
    )


def _test2_theta(r, x, g):
    return (3.0 + g + np.exp(x * (g - 3.0))) / (r * x + 14.0)


def _test2_omega(r, x, g):
    theta = _test2_theta(r, x, g)
    return (1.0 + x * np.exp(x * (g - 3.0))) * gamma_fn(4.0 - theta) / (6.0 * r * x + 84.0)


def builtin_test2(corrected: bool = True) -> ProblemSpec:
    """Robin problem with exact solution ``(x^5 + x + 1)(t^3 + 1)``, ``m = 9``.

    :arg corrected: if *False*, use the boundary datum ``-5 (t^2 + 1)`` and the
        source exponent ``2 - theta`` as printed in the original test problem.
        Neither is consistent with the exact solution; the default uses
        ``-5 (t^3 + 1)`` and ``3 - theta``.
    """
    power = 3.0 if corrected else 2.0

    def space(x):
        return x**5 + x + 1.0

    def f(x, t):
        x = np.asarray(x, dtype=np.float64)
        memory = np.zeros_like(x)
        for r in range(1, 10):
            memory += stable_powdiff_log(
                t, power - _test2_theta(r, x, -2.0), power - _test2_theta(r, x, 3.0))
        return (memory + (t**3 + 1.0) * (1.0 - np.cos(2.0 * x * t))) * space(x)

    if corrected:
        def mu1(t):
            return -5.0 * (t**3 + 1.0)
    else:
        def mu1(t):
            return -5.0 * (t**2 + 1.0)

    exact = ExactSolution(
        u=lambda x, t: space(x) * (t**3 + 1.0),
        note="(x^5 + x + 1)(t^3 + 1)",
        space=space,
        time_powers=((0.0, 1.0), (3.0, 1.0)),
    )

    return ProblemSpec(
        l=1.0, T=1.0,
        dist=OrderDistribution(m=9, alpha=-2.0, beta=3.0,
                               theta=_test2_theta, omega=_test2_omega),
        k=lambda x, t: (10.0 + np.cos(2.0 * t)) / (5.0 * x**4 + 1.0),
        q=lambda x, t: 1.0 - np.cos(2.0 * x * t),
        f=f,
        u0=space,
        bc=Robin(beta1=lambda t: 5.0 + np.cos(2.0 * t),
                 beta2=lambda t: 1.0 - np.cos(2.0 * t) / 3.0,
                 mu1=mu1,
                 mu2=lambda t: 13.0 * (t**3 + 1.0)),
        c1=1.5,
        beta0=2.0 / 3.0,
        exact=exact,
        theta_max=0.5,
        name="test2" if corrected else "test2-printed",
    )


def builtin_problem(name: str) -> ProblemSpec:
    if name == "test1":
        return builtin_test1()
    if name == "test2":
        return builtin_test2()
    if name == "test2-printed":
        return builtin_test2(corrected=False)
    raise KeyError(f"unknown built-in problem: {name!r}")


# }}}


# {{{ manufactured solutions


def _central(F: Callable[[float], float], x: float, d: float) -> float:
    # central differences at d, d/2, d/4 with two Richardson sweeps, O(d^6)
    def diff(s):
        return (F(x + s) - F(x - s)) / (2.0 * s)

    d1, d2, d4 = diff(d), diff(0.5 * d), diff(0.25 * d)
    r1 = (4.0 * d2 - d1) / 3.0
    r2 = (4.0 * d4 - d2) / 3.0
    return (16.0 * r2 - r1) / 15.0


def caputo_numeric(u: Callable[[float], float], theta, t: float,
                   npoints: int = 64) -> np.ndarray:
    """Caputo derivative of a smooth scalar function by Gauss-Legendre quadrature.

    The substitution :math:`t - \\eta = s^{1/(1 - \\theta)}` removes the
    weak singularity of the kernel, so the transformed integrand is smooth.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    xi, wi = np.polynomial.legendre.leggauss(npoints)
    d = 1.0e-4 * max(t, 1.0e-3)

    out = np.empty(theta.shape)
    for idx, th in np.ndenumerate(theta):
        p = 1.0 - th
        smax = t**p
        s = 0.5 * smax * (xi + 1.0)
        eta = t - s ** (1.0 / p)
        du = np.array([_central(u, e, d) for e in eta])
        out[idx] = 0.5 * smax * np.dot(wi, du) / (p * gamma_fn(1.0 - th))

    return out


def mms_source(exact: ExactSolution, problem: ProblemSpec, x: float, t: float,
               npoints: int = 128) -> float:
    """Source term that makes *exact* solve the equation of *problem*.

    The distributed operator is integrated over gamma with *npoints*
    Gauss-Legendre nodes. The flux :math:`(k u_x)_x` uses nested
    Richardson-extrapolated central differences.
    """
    if t <= 0.0:
        raise DomainError(f"source is only defined for t > 0 (got {t})")

    quad = build_quadrature(problem.dist.alpha, problem.dist.beta, npoints)
    theta, omega = problem.dist.sample(x, quad.nodes)

    if exact.is_separable:
        caputo = np.zeros_like(theta)
        for p, c in exact.time_powers:
            caputo += c * caputo_exact_power(p, theta, t)
        caputo *= float(exact.space(x))
    else:
        caputo = caputo_numeric(lambda s: float(exact(x, s)), theta, t)

    operator = float(quad.integrate((omega * caputo).sum(axis=0)))

    d = 2.0e-2 * problem.l

    def flux(s):
        ux = _central(lambda z: float(exact(z, t)), s, d)
        return float(problem.k(s, t)) * ux

    divergence = _central(flux, x, d)
    return operator - divergence + float(problem.q(x, t)) * float(exact(x, t))


def robin_boundary_data(exact: ExactSolution, problem: ProblemSpec,
                        t: float) -> tuple[float, float]:
    """Values of ``mu1(t)`` and ``mu2(t)`` implied by *exact* and the Robin coefficients."""
    bc = problem.bc
    if not isinstance(bc, Robin):
        raise TypeError("robin_boundary_data requires a Robin problem")

    d = 1.0e-3 * problem.l
    l = problem.l
    ux0 = _central(lambda z: float(exact(z, t)), 0.0, d)
    uxl = _central(lambda z: float(exact(z, t)), l, d)
    mu1 = bc.beta1(t) * float(exact(0.0, t)) - float(problem.k(0.0, t)) * ux0
    mu2 = bc.beta2(t) * float(exact(l, t)) + float(problem.k(l, t)) * uxl
    return float(mu1), float(mu2)


# }}}


# {{{ validation


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    inferred_c1: float | None = None
    inferred_beta0: float | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": list(self.violations),
            "warnings": list(self.warnings),
            "inferred_c1": self.inferred_c1,
            "inferred_beta0": self.inferred_beta0,
        }


_BOUND_GUARD = 1.0e-12


def _locations(mask: np.ndarray, x: np.ndarray, t: np.ndarray, limit: int = 5) -> str:
    it, ix = np.nonzero(mask)
    pts = [f"(x={x[i]:.6g}, t={t[j]:.6g})" for j, i in zip(it[:limit], ix[:limit])]
    more = f" and {it.size - limit} more" if it.size > limit else ""
    return ", ".join(pts) + more


def validate_problem(problem: ProblemSpec, grid: Grid, npoints: int = 64) -> ValidationReport:
    """Sample the coefficient bounds on *grid* and report every violation.

    ``k`` is sampled at nodes and midpoints on all levels, ``q`` at nodes,
    ``f`` at nodes for ``t > 0``. Never raises for bad data.
    """
    report = ValidationReport()
    x = grid.x
    xh = grid.x_half
    t = grid.t

    if abs(grid.l - problem.l) > 1.0e-12 * problem.l:
        report.violations.append(f"grid length {grid.l} differs from problem length {problem.l}")
    if grid.T > problem.T * (1.0 + 1.0e-12):
        report.violations.append(f"grid final time {grid.T} exceeds problem horizon {problem.T}")

    try:
        quad = build_quadrature(problem.dist.alpha, problem.dist.beta, npoints)
        report.violations.extend(
            f"order distribution: {msg}" for msg in problem.dist.check(x, quad))
    except Exception as exc:
        report.violations.append(f"order distribution cannot be evaluated: {exc}")

    def sample(func, xs, times=t):
        with np.errstate(all="ignore"):
            return np.array([np.broadcast_to(func(xs, tj), xs.shape) for tj in times],
                            dtype=np.float64)

    try:
        kv = np.concatenate([sample(problem.k, x), sample(problem.k, xh)], axis=1)
        kx = np.concatenate([x, xh])
        kmin = float(np.min(kv))
        report.inferred_c1 = kmin - _BOUND_GUARD
        if not np.all(np.isfinite(kv)):
            report.violations.append("k is not finite on the grid")
        if problem.c1 <= 0.0:
            report.violations.append(f"declared c1 = {problem.c1} must be positive")
        elif np.any(kv < problem.c1):
            report.violations.append(
                f"k below declared c1 = {problem.c1} at "
                + _locations(kv < problem.c1, kx, t))

        qv = sample(problem.q, x)
        if np.any(qv < 0.0) or not np.all(np.isfinite(qv)):
            report.violations.append("q negative at " + _locations(~(qv >= 0.0), x, t))

        fv = sample(problem.f, x, t[1:])
        if not np.all(np.isfinite(fv)):
            report.violations.append("f not finite at " + _locations(~np.isfinite(fv), x, t[1:]))

        u0 = np.broadcast_to(problem.u0(x), x.shape)
        if not np.all(np.isfinite(u0)):
            report.violations.append("initial data not finite")
    except Exception as exc:
        report.violations.append(f"coefficient evaluation failed: {exc}")
        return report

    bc = problem.bc
    if isinstance(bc, Robin):
        beta = np.array([[bc.beta1(tj), bc.beta2(tj)] for tj in t], dtype=np.float64)
        bmin = float(np.min(beta))
        report.inferred_beta0 = bmin - _BOUND_GUARD
        if bmin <= 0.0:
            report.violations.append(f"Robin coefficient not positive: min {bmin:.6g}")
        if problem.beta0 is None or problem.beta0 <= 0.0:
            report.violations.append(f"declared beta0 = {problem.beta0} must be positive")
        elif bmin < problem.beta0:
            report.violations.append(
                f"Robin coefficient below declared beta0 = {problem.beta0}: min {bmin:.6g}")
    else:
        c0 = float(bc.mu1(0.0)) - float(u0[0])
        cl = float(bc.mu2(0.0)) - float(u0[-1])
        if abs(c0) > 1.0e-12 * max(1.0, abs(u0[0])):
            report.warnings.append(f"u0(0) differs from mu1(0) by {c0:.6g}")
        if abs(cl) > 1.0e-12 * max(1.0, abs(u0[-1])):
            report.warnings.append(f"u0(l) differs from mu2(0) by {cl:.6g}")

    return report


# }}}
