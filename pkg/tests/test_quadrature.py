import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from nlcl.errors import QuadratureFailure
from nlcl.quadrature import gk15, integrate, integrate_intervals, integrate_to_infinity


def test_gk15_exact_for_degree_22_polynomial():
    coef = np.arange(1.0, 24.0)
    f = lambda x: np.polynomial.polynomial.polyval(x, coef)
    exact = np.polynomial.polynomial.polyval(1.0, np.polynomial.polynomial.polyint(coef)) \
        - np.polynomial.polynomial.polyval(-0.5, np.polynomial.polynomial.polyint(coef))
    val, err = gk15(f, -0.5, 1.0)
    assert val[0] == pytest.approx(exact, rel=1e-14)


def test_gk15_vectorized_over_intervals():
    val, _ = gk15(np.cos, [0.0, 1.0, 2.0], [1.0, 2.0, 3.0])
    assert np.allclose(val, np.sin([1.0, 2.0, 3.0]) - np.sin([0.0, 1.0, 2.0]), rtol=1e-14)


def test_peaked_power_integrand():
    # int_0^1 (1 - x)^p = 1/(p + 1), mass packed into a layer of width ~1/p
    for p in (10.0, 256.0, 4096.0):
        val = integrate(lambda x: (1.0 - x) ** p, 0.0, 1.0, rtol=1e-13)
        assert val == pytest.approx(1.0 / (p + 1.0), rel=1e-12)


def test_breakpoints_at_kink():
    val = integrate(lambda x: np.abs(x - 0.3), 0.0, 1.0, breakpoints=[0.3])
    assert val == pytest.approx(0.5 * (0.3 ** 2 + 0.7 ** 2), rel=1e-14)


def test_reversed_and_empty_intervals():
    assert integrate(np.exp, 1.0, 0.0) == pytest.approx(-(math.e - 1.0), rel=1e-13)
    assert integrate(np.exp, 2.0, 2.0) == 0.0


def test_integrate_to_infinity_exponential():
    for eps in (1.0, 1e-2, 1e-4):
        val = integrate_to_infinity(lambda x: np.exp(-x / eps), 0.0, scale=eps)
        assert val == pytest.approx(eps, rel=1e-12)


def test_integrate_to_infinity_matches_scipy():
    f = lambda x: 1.0 / (1.0 + x) ** 3
    ref, _ = quad(lambda x: 1.0 / (1.0 + x) ** 3, 0.0, np.inf, epsabs=0, epsrel=1e-13)
    assert integrate_to_infinity(f, 0.0) == pytest.approx(ref, rel=1e-10)


def test_integrate_intervals_per_interval_values():
    a = np.array([0.0, 0.5, 2.0])
    b = np.array([0.5, 2.0, 7.0])
    out = integrate_intervals(lambda x: np.exp(-3.0 * x), a, b)
    assert np.allclose(out, (np.exp(-3 * a) - np.exp(-3 * b)) / 3.0, rtol=1e-13, atol=0)


def test_non_finite_integrand_raises():
    with pytest.raises(QuadratureFailure):
        integrate(lambda x: np.full(np.shape(x), np.nan), 0.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=12), st.floats(-3, 0), st.floats(0.01, 3))
def test_polynomials_match_antiderivative(coef, a, width):
    b = a + width
    P = np.polynomial.polynomial
    anti = P.polyint(coef)
    exact = P.polyval(b, anti) - P.polyval(a, anti)
    scale = sum(abs(c) for c in coef) * max(1.0, abs(a), abs(b)) ** len(coef) * width
    got = integrate(lambda x: P.polyval(x, coef), a, b, rtol=1e-13, atol=1e-14 * scale)
    assert abs(got - exact) <= 1e-12 * scale + 1e-300
