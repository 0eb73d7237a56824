from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from vdofrac.fracops import DomainError
from vdofrac.mesh import Grid
from vdofrac.problems import (
    Dirichlet,
    ExactSolution,
    builtin_problem,
    builtin_test1,
    builtin_test2,
    caputo_numeric,
    mms_source,
    robin_boundary_data,
    validate_problem,
)
from vdofrac.fracops import caputo_exact_power


def test_builtin_names():
    assert builtin_problem("test1").name == "test1"
    assert builtin_problem("test2").is_robin
    assert builtin_problem("test2-printed").name == "test2-printed"
    with pytest.raises(KeyError):
        builtin_problem("test3")


def test_test1_facts():
    p = builtin_test1()
    assert p.dist.theta_max(p.l) == pytest.approx(0.856, abs=5e-4)
    assert p.exact(0.5, 0.99) == pytest.approx(3.2176625, abs=1e-7)
    # k u_x does not depend on x
    x = np.linspace(0, 1, 7)
    for t in [0.0, 0.3, 0.99]:
        flux = p.k(x, t) * (3 * x**2 + 1) * (t**2 + 1)
        np.testing.assert_allclose(flux, (8 + np.sin(t)) * (t**2 + 1), rtol=1e-14)


def test_test2_facts():
    p = builtin_test2()
    assert p.dist.theta_max(p.l) == pytest.approx(0.5, abs=1e-12)
    for t in [0.1, 0.5, 0.99]:
        mu1, mu2 = robin_boundary_data(p.exact, p, t)
        assert mu1 == pytest.approx(-5 * (t**3 + 1), rel=1e-10)
        assert mu2 == pytest.approx(13 * (t**3 + 1), rel=1e-10)
        assert p.bc.mu1(t) == pytest.approx(mu1, rel=1e-10)
    printed = builtin_test2(corrected=False)
    assert printed.bc.mu1(0.5) == pytest.approx(-5 * 1.25)


@pytest.mark.parametrize("name", ["test1", "test2"])
@pytest.mark.parametrize(("x", "t"), [(0.5, 0.5), (0.0, 0.1), (1.0, 0.99), (0.3, 0.02)])
def test_mms_matches_closed_form(name, x, t):
    p = builtin_problem(name)
    ref = float(p.f(x, t))
    assert abs(mms_source(p.exact, p, x, t) - ref) <= 1e-9 * max(1.0, abs(ref))


def test_mms_exposes_printed_exponent():
    printed = builtin_test2(corrected=False)
    corrected = builtin_test2()
    diff = abs(mms_source(corrected.exact, printed, 0.5, 0.5) - float(printed.f(0.5, 0.5)))
    assert diff > 0.1


def test_mms_constant_solution():
    p = dataclasses.replace(builtin_test1(), q=lambda x, t: 0.0 * x)
    const = ExactSolution(u=lambda x, t: 0.0 * x + 4.0)
    assert mms_source(const, p, 0.4, 0.7) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(DomainError):
        mms_source(p.exact, p, 0.4, 0.0)


def test_mms_non_separable_path():
    p = builtin_test1()
    separable = p.exact
    opaque = ExactSolution(u=separable.u)
    assert not opaque.is_separable
    assert mms_source(opaque, p, 0.4, 0.6) == pytest.approx(mms_source(separable, p, 0.4, 0.6), rel=1e-8)


@pytest.mark.parametrize("theta", [0.1, 0.5, 0.9])
def test_caputo_numeric_powers(theta):
    value = caputo_numeric(lambda s: s**3 + 2 * s, theta, 0.8)
    expected = caputo_exact_power(3, theta, 0.8) + 2 * caputo_exact_power(1, theta, 0.8)
    assert value[0] == pytest.approx(expected, rel=1e-9)


# {{{ validation


@pytest.mark.parametrize("name", ["test1", "test2"])
def test_builtins_validate(name):
    p = builtin_problem(name)
    grid = Grid(l=1.0, T=0.99, N=10, j0=22)
    report = validate_problem(p, grid)
    assert report.ok, report.violations
    assert report.to_dict()["ok"]


def test_inferred_bounds():
    report = validate_problem(builtin_test1(), Grid(l=1.0, T=0.99, N=10, j0=99))
    assert report.inferred_c1 == pytest.approx(2.0, abs=1e-11)
    assert report.inferred_c1 < 2.0
    report = validate_problem(builtin_test2(), Grid(l=1.0, T=0.99, N=10, j0=22))
    assert 0.66 < report.inferred_beta0 < 1.0


def test_negative_q_is_reported():
    p = dataclasses.replace(builtin_test1(), q=lambda x, t: -1.0 + 0.0 * x)
    report = validate_problem(p, Grid(l=1.0, T=0.5, N=4, j0=2))
    assert not report.ok
    assert any(v.startswith("q negative at (x=0,") for v in report.violations)


def test_robin_zero_coefficient_is_reported():
    p = builtin_test2()
    bc = dataclasses.replace(p.bc, beta1=lambda t: 0.0)
    report = validate_problem(dataclasses.replace(p, bc=bc), Grid(l=1.0, T=0.5, N=4, j0=2))
    assert any("beta0" in v for v in report.violations)


def test_k_below_declared_bound():
    p = dataclasses.replace(builtin_test1(), c1=2.5)
    report = validate_problem(p, Grid(l=1.0, T=0.5, N=4, j0=2))
    assert any("below declared c1" in v for v in report.violations)


def test_bad_distribution_and_horizon():
    p = builtin_test1()
    dist = dataclasses.replace(p.dist, theta=lambda r, x, g: 1.5 + 0.0 * g)
    report = validate_problem(dataclasses.replace(p, dist=dist), Grid(l=1.0, T=2.0, N=4, j0=2))
    assert any("order outside" in v for v in report.violations)
    assert any("exceeds problem horizon" in v for v in report.violations)


def test_corner_mismatch_is_a_warning():
    p = dataclasses.replace(builtin_test1(), bc=Dirichlet(lambda t: 0.0, lambda t: 0.0), exact=None)
    report = validate_problem(p, Grid(l=1.0, T=0.5, N=4, j0=2))
    assert report.ok
    assert len(report.warnings) == 2


def test_validation_never_raises():
    def broken(x, t):
        raise RuntimeError("boom")

    p = dataclasses.replace(builtin_test1(), k=broken)
    report = validate_problem(p, Grid(l=1.0, T=0.5, N=4, j0=2))
    assert any("boom" in v for v in report.violations)


# }}}
