import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mvfield.errors import NonFiniteIntegrand, UnsupportedOrder, InputError
from mvfield.quadrature import (
    DEFAULT_CONFIG,
    QuadratureConfig,
    gauss_legendre,
    integrate_adaptive,
    integrate_batch,
)


def test_order_two_textbook():
    x, w = gauss_legendre(2)
    np.testing.assert_allclose(x, [-1 / math.sqrt(3), 1 / math.sqrt(3)], rtol=0, atol=1e-15)
    np.testing.assert_allclose(w, [1, 1], rtol=0, atol=1e-15)


def test_order_three_textbook():
    x, w = gauss_legendre(3)
    np.testing.assert_allclose(x, [-math.sqrt(0.6), 0, math.sqrt(0.6)], rtol=0, atol=1e-15)
    np.testing.assert_allclose(w, [5 / 9, 8 / 9, 5 / 9], rtol=0, atol=1e-15)


def test_order_three_degree_five_exact():
    x, w = gauss_legendre(3)
    assert abs(w @ x**4 - 0.4) <= 1e-14


@pytest.mark.parametrize("order", range(2, 65))
def test_rule_matches_numpy_and_is_well_formed(order):
    x, w = gauss_legendre(order)
    xr, wr = np.polynomial.legendre.leggauss(order)
    # numpy's own high-order weights are only good to ~1e-12
    np.testing.assert_allclose(x, xr, rtol=0, atol=1e-14)
    np.testing.assert_allclose(w, wr, rtol=5e-12)
    assert np.all(w > 0)
    assert abs(w.sum() - 2) <= 1e-14
    np.testing.assert_array_equal(x, -x[::-1])


@pytest.mark.parametrize("order", [5, 16, 33, 64])
def test_rule_against_high_precision(order):
    mpmath = pytest.importorskip("mpmath")
    x, w = gauss_legendre(order)
    with mpmath.workdps(40):
        P = lambda t: mpmath.legendre(order, t)
        for xi, wi in zip(x, w):
            root = mpmath.findroot(P, mpmath.mpf(float(xi)))
            dp = mpmath.diff(P, root)
            weight = 2 / ((1 - root**2) * dp**2)
            assert abs(float(root) - xi) <= 1e-15
            assert abs(float(weight) - wi) <= 2e-13 * float(weight)


@pytest.mark.parametrize("order", [0, 1, 65, 2.5, True])
def test_unsupported_order(order):
    with pytest.raises(UnsupportedOrder):
        gauss_legendre(order)


@pytest.mark.parametrize("kwargs", [dict(order=1), dict(tol_rel=0), dict(max_depth=0),
                                    dict(max_depth=61), dict(min_panel=-1)])
def test_config_validation(kwargs):
    with pytest.raises(InputError):
        QuadratureConfig(**kwargs)


def test_defaults():
    assert (DEFAULT_CONFIG.order, DEFAULT_CONFIG.tol_rel, DEFAULT_CONFIG.max_depth,
            DEFAULT_CONFIG.min_panel) == (16, 1e-10, 40, 1e-15)


@given(order=st.integers(2, 20), seed=st.integers(0, 2**32 - 1))
def test_polynomial_exactness(order, seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(-1, 1, 2 * order)  # degree 2*order - 1
    x, w = gauss_legendre(order)
    exact = np.polynomial.polynomial.polyval(1.0, np.polynomial.polynomial.polyint(c)) - \
        np.polynomial.polynomial.polyval(-1.0, np.polynomial.polynomial.polyint(c))
    got = w @ np.polynomial.polynomial.polyval(x, c)
    assert abs(got - exact) <= 1e-13 * max(1.0, np.abs(c).sum())


def test_sin():
    v, err, ok = integrate_adaptive(np.sin, 0.0, math.pi)
    assert ok and abs(v - 2) <= 1e-10


def test_constant_is_exact():
    v, _, ok = integrate_adaptive(lambda t: 1.0, 0.0, 1.0)
    assert ok and v == 1.0


@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-6])
def test_near_singular_and_error_overestimates(eps):
    exact = 2 * (math.sqrt(1 + eps) - math.sqrt(eps))
    v, err, ok = integrate_adaptive(lambda t: 1 / np.sqrt(t + eps), 0.0, 1.0)
    assert ok
    assert abs(v - exact) <= 1e-8
    assert err >= abs(v - exact)
    assert err <= DEFAULT_CONFIG.tol_rel * abs(v)


def test_scalar_callable_is_vectorized():
    v, _, ok = integrate_adaptive(lambda t: math.exp(t), 0.0, 1.0)
    assert ok and abs(v - (math.e - 1)) <= 1e-12


@given(a=st.floats(-3, 3), w1=st.floats(0.01, 3), w2=st.floats(0.01, 3),
       k=st.floats(0.5, 20))
def test_external_split_invariance(a, w1, w2, k):
    f = lambda t: np.cos(k * t) + 1 / (1 + t * t)
    m, b = a + w1, a + w1 + w2
    whole = integrate_adaptive(f, a, b).value
    parts = integrate_adaptive(f, a, m).value + integrate_adaptive(f, m, b).value
    scale = w1 + w2
    assert abs(whole - parts) <= 4 * DEFAULT_CONFIG.tol_rel * scale


def test_bad_bounds():
    with pytest.raises(InputError):
        integrate_adaptive(np.sin, 1.0, 1.0)


def test_non_finite_integrand():
    with pytest.raises(NonFiniteIntegrand):
        integrate_adaptive(lambda t: np.where(t > 0.5, np.nan, 1.0), 0.0, 1.0)


def test_depth_limit_flags_not_converged():
    cfg = QuadratureConfig(order=4, max_depth=2)
    v, err, ok = integrate_adaptive(lambda t: 1 / np.sqrt(t + 1e-9), 0.0, 1.0, cfg)
    assert not ok and np.isfinite(v)


def test_batch_matches_scalar_calls():
    ks = np.array([1.0, 3.0, 7.0])
    res = integrate_batch(lambda k, t: np.sin(ks[k] * t), np.zeros(3), np.full(3, 2.0))
    exact = (1 - np.cos(2 * ks)) / ks
    np.testing.assert_allclose(res.value, exact, rtol=0, atol=1e-12)
    assert res.converged.all()


def test_breaks_handle_kinks():
    breaks = [[0.3]]
    res = integrate_batch(lambda k, t: np.abs(t - 0.3), [0.0], [1.0], breaks=breaks)
    assert abs(res.value[0] - (0.3**2 + 0.7**2) / 2) <= 1e-15


def test_must_split_is_honoured():
    seen = []

    def fn(k, t):
        seen.append(t.size)
        return np.ones_like(t)

    res = integrate_batch(fn, [0.0], [1.0],
                          must_split=lambda k, lo, hi: (hi - lo) > 0.25)
    # four admissible panels, all evaluated in one pass
    assert seen == [4 * 7 * 16]
    assert abs(res.value[0] - 1) <= 1e-15
