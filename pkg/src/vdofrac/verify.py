"""Property suites run by ``vdofrac verify``.

Every suite returns a :class:`SuiteResult`; the checks use independent
oracles where one exists (``math.gamma``, dense linear algebra, closed-form
Caputo derivatives) and the discrete estimates otherwise.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from vdofrac.estimates import dirichlet_ledger, error_ledger, robin_ledger
from vdofrac.expr import Expression, ExprSyntaxError
from vdofrac.fracops import (
    KernelTable,
    OrderDistribution,
    apply_distributed_l1,
    build_kernel_table,
    build_quadrature,
    caputo_exact_power,
    gamma_fn,
    lemma2_gap,
)
from vdofrac.mesh import Grid, TridiagonalSystem, thomas_solve
from vdofrac.problems import Dirichlet, ProblemSpec, builtin_problem, mms_source
from vdofrac.scheme import (
    build_scheme_kernel,
    march,
    residual_norm,
    scheme_residuals,
)

__all__ = ["SUITES", "SuiteResult", "dense_march", "run_suites"]


@dataclass
class SuiteResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {"passed": self.passed, "seconds": self.seconds, **self.details}


@dataclass
class VerifyContext:
    """Options shared by the suites.

    :attr problems: built-in problem names used by the problem-level suites.
    :attr inject_fault: perturb kernel tables so that weight-dependent
        checks must fail.
    """

    problems: tuple[str, ...] = ("test1", "test2")
    quad_nodes: int = 64
    seed: int = 20240917
    inject_fault: bool = False

    def kernel(self, problem: ProblemSpec, grid: Grid) -> KernelTable:
        kernel = build_scheme_kernel(problem, grid, self.quad_nodes)
        return kernel.perturbed() if self.inject_fault else kernel


def dense_march(problem: ProblemSpec, grid: Grid, kernel: KernelTable) -> np.ndarray:
    """Reference solution from dense Gaussian elimination.

    At every level the scheme equations are affine in the new values, so the
    full matrix is recovered column by column from the pointwise residuals
    and solved with ``numpy.linalg.solve``. No tridiagonal structure is used.
    """
    n = grid.N + 1
    levels = np.zeros((grid.j0 + 1, n))
    levels[0] = np.broadcast_to(problem.u0(grid.x), grid.x.shape)
    for j in range(1, grid.j0 + 1):
        levels[j] = 0.0
        r0 = scheme_residuals(levels, grid, problem, kernel, j)
        A = np.empty((n, n))
        for k in range(n):
            levels[j] = 0.0
            levels[j, k] = 1.0
            A[:, k] = scheme_residuals(levels, grid, problem, kernel, j) - r0
        levels[j] = np.linalg.solve(A, -r0)
    return levels


# {{{ suites


def _gamma(ctx: VerifyContext) -> dict:
    x = np.concatenate([np.linspace(0.05, 0.95, 91), np.linspace(1.0, 20.0, 191)])
    ours = gamma_fn(x)
    ref = np.array([math.gamma(v) for v in x])
    err = float(np.max(np.abs(ours / ref - 1.0)))
    return {"passed": err < 1.0e-13, "max_rel_error": err, "samples": int(x.size)}


def _quadrature(ctx: VerifyContext) -> dict:
    worst = 0.0
    for alpha, beta in [(0.0, 1.0), (0.2, 0.9), (-1.0, 3.0)]:
        quad = build_quadrature(alpha, beta, ctx.quad_nodes)
        for deg in range(0, 2 * ctx.quad_nodes, 7):
            exact = (beta ** (deg + 1) - alpha ** (deg + 1)) / (deg + 1)
            approx = float(quad.integrate(quad.nodes**deg))
            worst = max(worst, abs(approx - exact) / max(1.0, abs(exact)))
    return {"passed": worst < 1.0e-12, "max_rel_error": worst}


def constant_order_distribution(theta: float) -> OrderDistribution:
    """Single term of constant order with unit total weight on ``[0, 1]``."""
    return OrderDistribution(m=1, alpha=0.0, beta=1.0,
                             theta=lambda r, x, g: np.full(np.shape(g), theta),
                             omega=lambda r, x, g: np.ones(np.shape(g)))


def _telescoping(ctx: VerifyContext) -> dict:
    worst = 0.0
    cases = 0
    for theta in [0.0, 0.1, 0.35, 0.5, 0.75, 0.95]:
        dist = constant_order_distribution(theta)
        for tau, j0 in [(0.01, 100), (0.1, 10), (0.37, 7)]:
            quad = build_quadrature(0.0, 1.0, ctx.quad_nodes)
            kernel = build_kernel_table(dist, np.zeros(1), tau, j0, quad)
            if ctx.inject_fault:
                kernel = kernel.perturbed()
            t = tau * np.arange(j0 + 1)
            for j in range(1, j0 + 1):
                value = apply_distributed_l1(kernel.B[0], 2.5 * t[:j + 1], tau)
                exact = 2.5 * caputo_exact_power(1.0, theta, t[j])
                worst = max(worst, abs(value - exact) / abs(exact))
                cases += 1
    return {"passed": worst < 1.0e-12, "max_rel_error": worst, "cases": cases}


def random_kernel_row(rng: np.random.Generator, tau: float, j0: int,
                      npoints: int = 16) -> KernelTable:
    """Kernel table of a random multi-term distribution at one random node."""
    m = int(rng.integers(1, 4))
    a = rng.uniform(0.0, 0.95, size=m)
    b = rng.uniform(-0.5, 0.5, size=m)
    c = rng.uniform(0.1, 2.0, size=m)
    d = rng.uniform(0.0, 1.0, size=m)

    def theta(r, x, g):
        return np.clip(a[r - 1] + b[r - 1] * g * (1.0 - g) * (1.0 + x), 0.0, 0.99)

    def omega(r, x, g):
        return c[r - 1] * (1.0 + d[r - 1] * np.sin(3.0 * g + x) ** 2)

    dist = OrderDistribution(m=m, alpha=0.0, beta=1.0, theta=theta, omega=omega)
    quad = build_quadrature(0.0, 1.0, npoints)
    x = np.array([rng.uniform(0.0, 1.0)])
    return build_kernel_table(dist, x, tau, j0, quad)


def _lemma2(ctx: VerifyContext, ncases: int = 1000) -> dict:
    rng = np.random.default_rng(ctx.seed)
    worst = math.inf
    for _ in range(ncases):
        tau = float(10.0 ** rng.uniform(-3.0, 0.5))
        j0 = int(rng.integers(1, 40))
        kernel = random_kernel_row(rng, tau, j0)
        if ctx.inject_fault:
            kernel = kernel.perturbed(lag=min(1, j0 - 1))
        j = int(rng.integers(0, j0))
        history = rng.normal(size=j + 2) * 10.0 ** rng.uniform(-2.0, 2.0)
        worst = min(worst, float(lemma2_gap(kernel.B[0], history, tau)))
    return {"passed": worst >= -1.0e-12, "min_gap": worst, "cases": ncases}


def _kernel(ctx: VerifyContext) -> dict:
    details = {}
    passed = True
    for name in ctx.problems:
        problem = builtin_problem(name)
        grid = Grid(l=problem.l, T=0.99, N=10, j0=99)
        k64 = build_scheme_kernel(problem, grid, 64)
        k128 = build_scheme_kernel(problem, grid, 128)
        if ctx.inject_fault:
            k64 = k64.perturbed()
        monotone = bool(np.all(k64.B > 0.0) and np.all(np.diff(k64.B, axis=1) <= 0.0))
        change = float(np.max(np.abs(k64.B - k128.B) / np.abs(k128.B)))
        ok = monotone and change < 1.0e-12
        passed &= ok
        details[name] = {"monotone": monotone, "p_doubling_rel_change": change}
    return {"passed": passed, **details}


def _thomas(ctx: VerifyContext, ncases: int = 50) -> dict:
    rng = np.random.default_rng(ctx.seed + 1)
    worst = 0.0
    for _ in range(ncases):
        n = int(rng.integers(2, 60))
        lower = rng.uniform(-1.0, 1.0, n)
        upper = rng.uniform(-1.0, 1.0, n)
        lower[0] = upper[-1] = 0.0
        diag = np.abs(lower) + np.abs(upper) + rng.uniform(0.1, 2.0, n)
        rhs = rng.normal(size=n)
        system = TridiagonalSystem(lower=lower, diag=diag, upper=upper, rhs=rhs)
        ref = np.linalg.solve(system.to_dense(), rhs)
        err = float(np.max(np.abs(thomas_solve(system) - ref)) / max(1.0, np.max(np.abs(ref))))
        worst = max(worst, err)
    return {"passed": worst < 1.0e-12, "max_rel_error": worst, "cases": ncases}


def _oracle(ctx: VerifyContext) -> dict:
    details = {}
    passed = True
    for name in ctx.problems:
        problem = builtin_problem(name)
        for N, j0 in [(4, 3), (7, 8), (12, 5)]:
            grid = Grid(l=problem.l, T=0.8, N=N, j0=j0)
            kernel = build_scheme_kernel(problem, grid, ctx.quad_nodes)
            result = march(problem, grid, kernel=kernel)
            ref = dense_march(problem, grid, kernel)
            diff = float(np.max(np.abs(result.field.levels - ref)))
            passed &= diff <= 1.0e-10
            details[f"{name}/N={N}/j0={j0}"] = diff
    return {"passed": passed, "max_abs_diff": details}


def _residual(ctx: VerifyContext) -> dict:
    details = {}
    passed = True
    for name in ctx.problems:
        problem = builtin_problem(name)
        grid = Grid(l=problem.l, T=0.99, N=10, j0=22)
        kernel = build_scheme_kernel(problem, grid, ctx.quad_nodes)
        result = march(problem, grid, kernel=kernel)
        check = kernel.perturbed() if ctx.inject_fault else kernel
        scale = max(1.0, float(np.max(np.abs(result.field.levels))))
        worst = max(residual_norm(result.field, problem, check, j)
                    for j in range(1, grid.j0 + 1)) / scale
        passed &= worst < 1.0e-9
        details[name] = worst
    return {"passed": passed, "max_scaled_residual": details}


def homogeneous_variant(problem: ProblemSpec) -> ProblemSpec:
    """The same operator and source with zero Dirichlet data."""
    zero = Dirichlet(mu1=lambda t: 0.0, mu2=lambda t: 0.0)
    return dataclasses.replace(problem, bc=zero, exact=None,
                               name=f"{problem.name}-homogeneous")


def ledger_runs(problem: ProblemSpec, grid: Grid, ctx: VerifyContext):
    """Yield ``(label, ledger)`` for every applicable estimate of *problem*."""
    result = march(problem, grid, kernel=ctx.kernel(problem, grid))
    if problem.is_robin:
        yield "robin", robin_ledger(result.field, problem, result.kernel)
    else:
        hom = homogeneous_variant(problem)
        res = march(hom, grid, kernel=ctx.kernel(hom, grid))
        yield "dirichlet-homogeneous", dirichlet_ledger(res.field, hom, res.kernel)
    if problem.exact is not None:
        yield "error", error_ledger(result.field, problem, result.kernel)


def _ledger(ctx: VerifyContext) -> dict:
    details = {}
    passed = True
    for name in ctx.problems:
        problem = builtin_problem(name)
        for N, j0 in [(10, 22), (20, 99)]:
            grid = Grid(l=problem.l, T=0.99, N=N, j0=j0)
            for label, ledger in ledger_runs(problem, grid, ctx):
                n = ledger.violations()
                passed &= n == 0
                rel = ledger.slack / np.abs(ledger.rhs)
                details[f"{name}/{label}/N={N}/j0={j0}"] = {
                    "violations": n,
                    "levels": int(ledger.levels.size),
                    "min_rel_slack": float(np.min(rel)),
                }
    return {"passed": passed, "runs": details}


def _mms(ctx: VerifyContext) -> dict:
    details = {}
    passed = True
    for name in ctx.problems:
        problem = builtin_problem(name)
        worst = 0.0
        for x in np.linspace(0.0, problem.l, 6):
            for t in [0.05, 0.4, 0.99]:
                ref = float(problem.f(x, t))
                value = mms_source(problem.exact, problem, float(x), t)
                worst = max(worst, abs(value - ref) / max(1.0, abs(ref)))
        passed &= worst < 1.0e-8
        details[name] = worst
    return {"passed": passed, "max_rel_diff": details}


def _expr(ctx: VerifyContext) -> dict:
    cases = {
        "1 + 2 * 3": 7.0,
        "2 ^ 3 ^ 2": 512.0,
        "-2 ^ 2": -4.0,
        "(1 - 2) - 3": -4.0,
        "8 / 4 / 2": 1.0,
        "gammafn(5)": 24.0,
        "max(1, min(3, 2)) + abs(-1)": 3.0,
        "exp(ln(2.5))": 2.5,
    }
    failures = [text for text, value in cases.items()
                if not math.isclose(Expression(text)(), value, rel_tol=1.0e-14)]

    errors = {"1+*2": 2, "sin(": 4, "(1": 2, "2 $ 3": 2}
    for text, offset in errors.items():
        try:
            Expression(text)
            failures.append(text)
        except ExprSyntaxError as exc:
            if exc.offset != offset:
                failures.append(text)
    return {"passed": not failures, "failures": failures}


# }}}


SUITES: dict[str, Callable[[VerifyContext], dict]] = {
    "gamma": _gamma,
    "quadrature": _quadrature,
    "telescoping": _telescoping,
    "lemma2": _lemma2,
    "kernel": _kernel,
    "thomas": _thomas,
    "oracle": _oracle,
    "residual": _residual,
    "ledger": _ledger,
    "mms": _mms,
    "expr": _expr,
}


def run_suites(names: list[str] | None = None,
               ctx: VerifyContext | None = None) -> dict[str, SuiteResult]:
    if ctx is None:
        ctx = VerifyContext()
    if names is None:
        names = list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suites: {unknown}; available: {list(SUITES)}")

    results = {}
    for name in names:
        tic = time.perf_counter()
        try:
            details = SUITES[name](ctx)
        except Exception as exc:
            details = {"passed": False, "error": f"{type(exc).__name__}: {exc}"}
        passed = bool(details.pop("passed"))
        results[name] = SuiteResult(name=name, passed=passed, details=details,
                                    seconds=time.perf_counter() - tic)
    return results
