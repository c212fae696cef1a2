import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from halfline_spectral.numerics import (
    OscillatorySpec, QuadratureError, integrate_de, integrate_oscillatory, integrate_panels,
    laplace_of_sampled, truncation_point,
)


def log_kernel(z):
    return -np.log(z) / (1 - z * z) / math.pi


def test_log_singular_integral(oracle):
    r = integrate_de(log_kernel, 0.0, 1.0, 1e-13, 1e-13)
    assert r.converged
    assert r.value == pytest.approx(oracle["pi_over_8"], abs=1e-13)
    assert r.abs_error_estimate <= 1e-13 + 1e-13 * r.value


def test_constant():
    r = integrate_de(lambda z: np.ones_like(z), 0.0, 1.0)
    assert r.value == pytest.approx(1.0, abs=1e-14)


def test_semi_infinite_poisson_kernel():
    r = integrate_de(lambda z: 3.0 / (9.0 + z * z), 0.0, math.inf, 1e-12, 1e-12, scale=3.0)
    assert r.converged
    assert r.value == pytest.approx(math.pi / 2, abs=1e-11)


def test_reversed_limits_negate():
    f = lambda x: np.exp(x)
    assert integrate_de(f, 1.0, 0.0).value == pytest.approx(-(math.e - 1), rel=1e-12)


def test_nonfinite_integrand_names_the_abscissa():
    with pytest.raises(QuadratureError) as exc:
        integrate_de(lambda x: np.where(x > 0.5, np.nan, x), 0.0, 1.0)
    assert exc.value.abscissa > 0.5


def test_budget_exhaustion_flags_nonconvergence():
    r = integrate_de(lambda x: np.sin(200 * x), 0.0, 50.0, 1e-14, 0.0, max_nodes=200)
    assert not r.converged


def test_halving_tolerance_does_not_increase_error_estimate():
    errs = [integrate_de(log_kernel, 0.0, 1.0, tol, tol).abs_error_estimate
            for tol in (1e-4, 5e-5, 2.5e-5, 1e-6, 5e-7, 1e-9, 5e-10, 1e-12)]
    assert all(b <= a for a, b in zip(errs, errs[1:]))


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 3.0))
def test_linearity(a, b, k):
    f = lambda x: np.exp(-k * x) * np.log(1 + 1 / x)
    g = lambda x: np.sqrt(x) / (1 + x * x)
    tol = 1e-10
    rf = integrate_de(f, 0.0, 1.0, tol, 0.0).value
    rg = integrate_de(g, 0.0, 1.0, tol, 0.0).value
    rh = integrate_de(lambda x: a * f(x) + b * g(x), 0.0, 1.0, tol, 0.0).value
    assert abs(rh - (a * rf + b * rg)) <= 2 * tol * (1 + abs(a) + abs(b))


def test_panels_exact_for_polynomials():
    r = integrate_panels(lambda x: x**7, np.linspace(0, 2, 5), 8)
    assert r.value == pytest.approx(2**8 / 8, rel=1e-14)


def test_oscillatory_gaussian_sine(oracle):
    spec = OscillatorySpec(lambda l: np.exp(-l * l), 1.0)
    r = integrate_oscillatory(lambda l: np.exp(-l * l) * np.sin(l), spec, 1e-12, 1e-12)
    assert r.converged
    assert r.value == pytest.approx(oracle["dawson_half"], abs=1e-11)


def test_oscillatory_product_of_sines(oracle):
    x = y = 1.0
    spec = OscillatorySpec(lambda l: np.exp(-l * l), x + y)
    r = integrate_oscillatory(lambda l: np.exp(-l * l) * np.sin(l * x) * np.sin(l * y), spec, 1e-12, 1e-12)
    assert r.value == pytest.approx(oracle["gauss_sinsin"], abs=1e-11)
    assert oracle["gauss_sinsin"] == pytest.approx(oracle["gauss_sinsin_closed"], rel=1e-15)


def test_oscillatory_without_oscillation():
    spec = OscillatorySpec(lambda l: np.exp(-l), 1.0, truncation_tail_bound=lambda L: math.exp(-L))
    r = integrate_oscillatory(lambda l: np.exp(-l), spec, 1e-10, 0.0)
    assert r.value == pytest.approx(1.0, abs=1e-10)
    assert r.tail_bound <= 1e-11


@pytest.mark.parametrize("f, a", [
    (lambda x: np.exp(-x) / np.sqrt(x), math.sqrt(math.pi)),
    (lambda x: 1 / (1 + x) ** 2, 1.0),
    (lambda x: np.exp(-x * x), math.sqrt(math.pi) / 2),
])
def test_oscillatory_agrees_with_de_on_smooth_integrands(f, a):
    tol = 1e-9
    # no oscillation: a tiny frequency hint gives wide panels
    spec = OscillatorySpec(lambda l: np.abs(f(l)), 1e-6)
    r = integrate_oscillatory(f, spec, tol, 0.0)
    assert r.converged
    d = integrate_de(f, 0.0, math.inf, tol, 0.0)
    assert abs(r.value - d.value) <= 10 * tol
    assert d.value == pytest.approx(a, abs=1e-8)


def test_non_decaying_envelope_is_flagged():
    spec = OscillatorySpec(lambda l: np.ones_like(l), 1.0, truncation_tail_bound=lambda L: math.inf)
    L, tail, ok = truncation_point(spec, 1e-3, 1.0, max_doublings=10)
    assert not ok


def test_laplace_of_sampled_examples():
    xs = np.linspace(0, 30, 30001)
    assert laplace_of_sampled(xs, np.ones_like(xs), 2.0) == pytest.approx(0.5, abs=1e-10)
    assert laplace_of_sampled(xs, np.sin(xs), 1.0) == pytest.approx(0.5, abs=1e-10)


def test_laplace_of_sampled_rejects_short_grid():
    xs = np.linspace(0, 3, 301)
    with pytest.raises(ValueError, match="need X >="):
        laplace_of_sampled(xs, np.ones_like(xs), 1.0, tol=1e-10)
