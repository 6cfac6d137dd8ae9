import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from mortarcontact.contact import (EDGE, FACE, POINT, ContactInfeasible, adaptive_eps, barrier,
                                   feature_weight, hermite_step, hermite_step_deriv, segment_rule,
                                   triangle_rule)


def test_barrier_inactive():
    assert barrier(1e-3, 1e-3) == (0.0, 0.0, 0.0)
    assert barrier(2e-3, 1e-3) == (0.0, 0.0, 0.0)


def test_barrier_half_eps():
    eps = 1e-3
    B, _, _ = barrier(eps / 2, eps)
    assert abs(B - eps * eps / 4 * math.log(2)) <= 1e-12 * eps * eps


def test_barrier_grows_towards_zero():
    eps = 1.0
    g = np.logspace(-12, -0.01, 200)
    B = np.array([barrier(t, eps)[0] for t in g])
    assert np.all(np.diff(B) < 0)
    assert B[0] > 20


def test_barrier_rejects_non_positive():
    with pytest.raises(ContactInfeasible):
        barrier(0.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(1e-6, 1.0))
def test_barrier_derivatives_fd(t, eps):
    g = t * eps
    B, dB, d2B = barrier(g, eps)
    h = 1e-6 * g
    fd1 = (barrier(g + h, eps)[0] - barrier(g - h, eps)[0]) / (2 * h)
    fd2 = (barrier(g + h, eps)[1] - barrier(g - h, eps)[1]) / (2 * h)
    assert_allclose(fd1, dB, rtol=1e-5, atol=1e-9 * eps)
    assert_allclose(fd2, d2B, rtol=1e-5, atol=1e-8)
    assert dB <= 0


def test_barrier_c2_at_support_radius():
    eps = 1e-3
    B, dB, d2B = barrier(eps * (1 - 1e-9), eps)
    assert abs(B) < 1e-20 and abs(dB) < 1e-10 and abs(d2B) < 1e-6


def test_hermite_midpoint():
    assert hermite_step(0.05, 0.1) == pytest.approx(0.5, abs=1e-15)
    assert hermite_step(0.0, 0.1) == 0 and hermite_step(0.1, 0.1) == 1


@pytest.mark.parametrize("x0", [0.0, 0.1])
def test_hermite_c1_at_ends(x0):
    d, h = 0.1, 1e-9
    left = (hermite_step(x0, d) - hermite_step(x0 - h, d)) / h
    right = (hermite_step(x0 + h, d) - hermite_step(x0, d)) / h
    assert abs(hermite_step(x0 + h, d) - hermite_step(x0 - h, d)) <= 1e-6
    assert abs(left - right) <= 1e-6
    assert abs(float(hermite_step_deriv(x0, d))) <= 1e-6


def test_hermite_derivative_fd():
    x = np.linspace(0.001, 0.099, 50)
    h = 1e-7
    fd = (hermite_step(x + h, 0.1) - hermite_step(x - h, 0.1)) / (2 * h)
    assert_allclose(fd, hermite_step_deriv(x, 0.1), atol=1e-6)


def test_feature_weights():
    assert feature_weight(FACE, 0.1, 0.1, master_bary=np.full(3, 1 / 3)) == 1.0
    assert feature_weight(EDGE, 0.1, 0.1, eta=0.05) == pytest.approx(0.5, abs=1e-15)
    assert feature_weight(POINT, 0.1, 0.1) == 1.0
    assert feature_weight(FACE, 0.1, 0.1, master_bary=[0.0, 0.5, 0.5]) == 0.0


@pytest.mark.parametrize("g_ref, expected", [(0.002, 0.001), (0.0005, 0.00045), (0.001 / 0.9, 0.001)])
def test_adaptive_eps(g_ref, expected):
    assert adaptive_eps(g_ref, 0.001) == pytest.approx(expected, rel=1e-15)


def test_adaptive_eps_keeps_reference_outside():
    g = np.logspace(-8, -1, 50)
    assert np.all(adaptive_eps(g, 1e-3) < g)


def _monomial_exact(a, b, c):
    # integral of l1^a l2^b l3^c over the reference triangle divided by its area
    return 2 * math.factorial(a) * math.factorial(b) * math.factorial(c) / math.factorial(a + b + c + 2)


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_triangle_rules_exact(order):
    pts, w = triangle_rule(order)
    assert_allclose(w.sum(), 1.0, rtol=0, atol=1e-15)
    assert np.all(w > 0)
    assert_allclose(pts.sum(axis=1), 1.0, atol=1e-15)
    for a in range(order + 1):
        for b in range(order + 1 - a):
            c = 0
            val = np.sum(w * pts[:, 0] ** a * pts[:, 1] ** b * pts[:, 2] ** c)
            assert_allclose(val, _monomial_exact(a, b, c), rtol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_segment_rule_exact(n):
    x, w = segment_rule(n)
    for k in range(2 * n):
        assert_allclose(np.sum(w * x ** k), 1 / (k + 1), rtol=1e-13)


def test_rule_order_errors():
    with pytest.raises(ValueError):
        triangle_rule(5)
    with pytest.raises(ValueError):
        segment_rule(0)
