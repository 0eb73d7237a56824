from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vdofrac.fracops import (
    DomainError,
    InvalidDistributionError,
    OrderDistribution,
    apply_distributed_l1,
    build_kernel_table,
    build_quadrature,
    caputo_exact_power,
    gamma_fn,
    l1_increment_diffs,
    l1_weights,
    lemma2_gap,
    lemma2_single_term_bound,
    stable_powdiff_log,
)
from vdofrac.problems import builtin_test1, builtin_test2
from vdofrac.verify import constant_order_distribution, random_kernel_row


# {{{ gamma


@pytest.mark.parametrize(("x", "expected"), [
    (1.0, 1.0),
    (1.5, 0.886226925452758),
    (2.5, 1.329340388179137),
])
def test_gamma_known_values(x, expected):
    assert gamma_fn(x) == pytest.approx(expected, rel=1e-14)


@settings(max_examples=300)
@given(st.floats(min_value=1e-3, max_value=40.0))
def test_gamma_against_math(x):
    assert gamma_fn(x) == pytest.approx(math.gamma(x), rel=5e-14)


def test_gamma_array_and_domain():
    x = np.array([0.25, 1.75, 3.0])
    np.testing.assert_allclose(gamma_fn(x), [math.gamma(v) for v in x], rtol=1e-14)
    for bad in [0.0, -1.5, np.array([1.0, -0.1])]:
        with pytest.raises(DomainError):
            gamma_fn(bad)


# }}}


# {{{ stable power differences


@pytest.mark.parametrize(("a", "b"), [(2.0, 3.0), (0.3, 0.9), (1.5, 1.5)])
def test_powdiff_limit_at_one(a, b):
    assert stable_powdiff_log(1.0, a, b) == pytest.approx(a - b, abs=1e-15)


def test_powdiff_example():
    expected = (math.exp(-2) - math.exp(-3)) / -1.0
    assert expected == pytest.approx(-0.0855482, abs=1e-7)
    assert stable_powdiff_log(math.exp(-1), 2.0, 3.0) == pytest.approx(expected, rel=1e-14)


def test_powdiff_near_zero():
    assert abs(stable_powdiff_log(1e-300, 2.0, 3.0)) < 1e-300


@settings(max_examples=200)
@given(st.floats(min_value=1e-9, max_value=1e-3),
       st.floats(min_value=0.1, max_value=3.0),
       st.floats(min_value=0.1, max_value=3.0))
def test_powdiff_continuous_across_series_switch(eps, a, b):
    # the series and the expm1 form must agree near t = 1
    t = 1.0 + eps
    value = stable_powdiff_log(t, a, b)
    z = (a - b) * math.log(t)
    ref = (a - b) * t**b * (1.0 + z / 2.0 + z * z / 6.0)
    assert value == pytest.approx(ref, rel=1e-6, abs=1e-12)


def test_powdiff_domain():
    with pytest.raises(DomainError):
        stable_powdiff_log(0.0, 1.0, 2.0)


# }}}


# {{{ quadrature


def test_quadrature_weight_sum_and_polynomials():
    quad = build_quadrature(0.0, 1.0, 8)
    assert quad.integrate(np.ones(8)) == pytest.approx(1.0, rel=1e-15)
    assert quad.integrate(quad.nodes**3) == pytest.approx(0.25, rel=1e-14)
    assert quad.npoints == 8


def test_quadrature_exponential():
    quad = build_quadrature(-2.0, 3.0, 64)
    exact = math.exp(3.0) - math.exp(-2.0)
    assert abs(quad.integrate(np.exp(quad.nodes)) / exact - 1.0) <= 1e-12


@pytest.mark.parametrize("args", [(1.0, 1.0, 8), (2.0, 1.0, 8), (0.0, 1.0, 1)])
def test_quadrature_rejects_bad_input(args):
    with pytest.raises(ValueError):
        build_quadrature(*args)


# }}}


# {{{ L1 weights and kernel tables


def test_l1_weights_example():
    w = l1_weights(0.5, 1.0, 1)
    # lag 1 is (sqrt(2) - 1) / Gamma(1.5)
    np.testing.assert_allclose(w, [1.0 / math.gamma(1.5), (math.sqrt(2) - 1) / math.gamma(1.5)],
                               rtol=1e-14)
    assert w[0] == pytest.approx(1.1283792, abs=1e-7)
    assert w[1] == pytest.approx(0.4673900, abs=1e-7)


@pytest.mark.parametrize("theta", [0.0, 0.3, 0.9])
@pytest.mark.parametrize("tau", [0.01, 1.0, 3.0])
def test_l1_weights_lag_zero(theta, tau):
    w = l1_weights(theta, tau, 0)
    assert w.shape == (1,)
    assert w[0] == pytest.approx(tau**-theta / math.gamma(2 - theta), rel=1e-14)


def test_l1_weights_order_zero_telescopes():
    tau = 0.1
    w = l1_weights(0.0, tau, 5)
    np.testing.assert_allclose(w, 1.0, rtol=1e-15)
    u = np.random.default_rng(0).normal(size=7)
    assert np.dot(w[::-1], np.diff(u)) == pytest.approx(u[-1] - u[0], abs=1e-14)


def test_l1_weights_domain():
    with pytest.raises(DomainError):
        l1_weights(1.0, 0.1, 3)
    with pytest.raises(ValueError):
        l1_weights(0.5, -0.1, 3)


def test_increment_diffs_large_lags():
    k = np.array([1e6, 1e9])
    p = 0.3
    ref = np.array([float((int(kk) + 1) ** p - int(kk) ** p) for kk in k])
    exact = p * k ** (p - 1.0) * (1.0 + (p - 1.0) / (2.0 * k))
    np.testing.assert_allclose(l1_increment_diffs(k, p), exact, rtol=1e-12)
    assert np.all(np.abs(ref - exact) / exact < 1e-3)


def test_kernel_constant_order_reduction():
    dist = OrderDistribution(m=1, alpha=0.0, beta=2.0,
                             theta=lambda r, x, g: np.full(np.broadcast_shapes(np.shape(x), np.shape(g)), 0.5),
                             omega=lambda r, x, g: np.full(np.broadcast_shapes(np.shape(x), np.shape(g)), 0.5))
    tau, j0 = 0.04, 12
    kernel = build_kernel_table(dist, np.linspace(0, 1, 3), tau, j0, build_quadrature(0.0, 2.0, 16))
    k = np.arange(j0)
    expected = (np.sqrt(k + 1.0) - np.sqrt(k)) * math.sqrt(tau) / math.gamma(1.5)
    for row in kernel.B:
        np.testing.assert_allclose(row, expected, rtol=1e-14)
    np.testing.assert_allclose(kernel.B[0], l1_weights(0.5, tau, j0 - 1) * tau, rtol=1e-14)


@pytest.mark.parametrize("problem", [builtin_test1(), builtin_test2()], ids=["test1", "test2"])
def test_kernel_monotone_and_quadrature_stable(problem):
    x = np.linspace(0.0, problem.l, 11)
    k64 = build_kernel_table(problem.dist, x, 0.01, 99, build_quadrature(problem.dist.alpha, problem.dist.beta, 64))
    k128 = build_kernel_table(problem.dist, x, 0.01, 99, build_quadrature(problem.dist.alpha, problem.dist.beta, 128))
    assert np.all(k64.B > 0.0)
    assert np.all(np.diff(k64.B, axis=1) <= 0.0)
    assert np.max(np.abs(k64.B / k128.B - 1.0)) < 1e-12
    with pytest.raises(ValueError):
        k64.B[0, 0] = 1.0


def test_kernel_rejects_invalid_distribution():
    bad = OrderDistribution(m=1, alpha=0.0, beta=1.0,
                            theta=lambda r, x, g: 1.2 + 0.0 * g,
                            omega=lambda r, x, g: 1.0 + 0.0 * g)
    with pytest.raises(InvalidDistributionError, match="order outside"):
        build_kernel_table(bad, np.zeros(2), 0.1, 3, build_quadrature(0.0, 1.0, 8))
    with pytest.raises(InvalidDistributionError):
        OrderDistribution(m=0, alpha=0.0, beta=1.0, theta=bad.theta, omega=bad.omega)


def test_perturbed_kernel_breaks_monotonicity():
    kernel = build_kernel_table(constant_order_distribution(0.4), np.zeros(1), 0.1, 5,
                                build_quadrature(0.0, 1.0, 8))
    bad = kernel.perturbed()
    assert bad.B[0, 1] > bad.B[0, 0]
    assert kernel.B[0, 1] < kernel.B[0, 0]


# }}}


# {{{ the distributed operator


def test_operator_constant_history():
    row = l1_weights(0.3, 0.1, 9) * 0.1
    assert apply_distributed_l1(row, np.full(11, 2.5), 0.1) == 0.0


@pytest.mark.parametrize("theta", [0.0, 0.2, 0.5, 0.85, 0.99])
def test_operator_telescopes_on_linear_histories(theta):
    tau, j0 = 0.03, 40
    kernel = build_kernel_table(constant_order_distribution(theta), np.zeros(1), tau, j0,
                                build_quadrature(0.0, 1.0, 8))
    t = tau * np.arange(j0 + 1)
    for j in range(1, j0 + 1):
        value = apply_distributed_l1(kernel.B[0], t[:j + 1], tau)
        assert value == pytest.approx(t[j] ** (1 - theta) / math.gamma(2 - theta), rel=1e-12)


def test_operator_test1_quadratic_history():
    problem = builtin_test1()
    x = np.array([0.5])
    quad = build_quadrature(problem.dist.alpha, problem.dist.beta, 64)
    theta, omega = problem.dist.sample(0.5, quad.nodes)
    exact = quad.integrate((omega * caputo_exact_power(2.0, theta, 0.5)).sum(axis=0))

    errors = []
    for j0 in [50, 100, 200]:
        tau = 0.5 / j0
        kernel = build_kernel_table(problem.dist, x, tau, j0, quad)
        t = tau * np.arange(j0 + 1)
        errors.append(abs(apply_distributed_l1(kernel.B[0], t**2, tau) - exact))
    # O(tau^(2 - theta_max)) with theta_max below 0.86
    assert errors[0] < 0.05 * exact
    assert errors[1] / errors[2] > 2.0 ** (2 - 0.86) * 0.9


def test_operator_length_mismatch():
    with pytest.raises(ValueError):
        apply_distributed_l1(np.ones(2), np.zeros(5), 0.1)
    with pytest.raises(ValueError):
        apply_distributed_l1(np.ones(2), np.zeros(1), 0.1)


# }}}


# {{{ lemma 2


def test_lemma2_example():
    row = l1_weights(0.5, 1.0, 0)
    gap = lemma2_gap(row, np.array([0.0, 1.0]), 1.0)
    assert gap == pytest.approx(1.0 / (2.0 * math.gamma(1.5)), rel=1e-14)
    assert gap == pytest.approx(0.564190, abs=1e-6)


def test_lemma2_constant_history():
    row = l1_weights(0.7, 0.2, 4) * 0.2
    assert lemma2_gap(row, np.full(6, -3.0), 0.2) == 0.0


def test_lemma2_random_sweep():
    rng = np.random.default_rng(7)
    worst = np.inf
    for _ in range(1000):
        tau = float(10.0 ** rng.uniform(-3, 0.5))
        n = int(rng.integers(2, 21))
        kernel = random_kernel_row(rng, tau, n - 1)
        history = rng.uniform(-1.0, 1.0, size=n)
        worst = min(worst, lemma2_gap(kernel.B[0], history, tau))
    assert worst >= -1e-12


@settings(max_examples=200)
@given(st.floats(min_value=0.0, max_value=0.99),
       st.floats(min_value=1e-3, max_value=5.0),
       st.lists(st.floats(min_value=-1.0, max_value=1.0), min_size=2, max_size=20))
def test_lemma2_single_term_bound(theta, tau, values):
    history = np.array(values)
    row = l1_weights(theta, tau, history.size - 2) * tau
    gap = lemma2_gap(row, history, tau)
    bound = lemma2_single_term_bound(theta, history, tau)
    assert gap >= bound - 1e-12 * max(1.0, abs(gap))


# }}}


# {{{ caputo of powers


def test_caputo_powers():
    assert caputo_exact_power(0, 0.4, 2.0) == 0.0
    assert caputo_exact_power(2, 0.0, 1.0) == pytest.approx(1.0, rel=1e-14)
    assert caputo_exact_power(2, 0.5, 1.0) == pytest.approx(2.0 / math.gamma(2.5), rel=1e-14)
    assert caputo_exact_power(2, 0.5, 1.0) == pytest.approx(1.504506, abs=1e-6)
    np.testing.assert_allclose(caputo_exact_power(3, np.array([0.1, 0.6]), 2.0),
                               [6 / math.gamma(3.9) * 2**2.9, 6 / math.gamma(3.4) * 2**2.4])
    with pytest.raises(DomainError):
        caputo_exact_power(2, 1.0, 1.0)
    with pytest.raises(DomainError):
        caputo_exact_power(0.5, 0.2, 1.0)


# }}}
