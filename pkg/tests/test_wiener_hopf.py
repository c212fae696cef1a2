import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import model
from halfline_spectral.wiener_hopf import (
    NonCbfError, make_context, psi_dagger, psi_lambda, psi_lambda_dagger,
    psi_lambda_dagger_boundary, psi_lambda_dagger_real, psi_lambda_log_slope,
)


def ctx(text, lam):
    return make_context(model(text), lam)


def test_psi_lambda_examples():
    c = ctx("brownian", 1.7)
    np.testing.assert_allclose(psi_lambda(c, np.array([0.0, 0.3, 2.89, 50.0])), 1.0, rtol=1e-15)
    assert psi_lambda(ctx("stable:1", 1.0), 4.0) == pytest.approx(3.0, rel=1e-15)
    for text in ("gamma", "relativistic:1", "cp-exp", "log-log"):
        assert psi_lambda(ctx(text, 0.8), 0.0) == 1.0


def test_removable_point_uses_limit():
    c = ctx("relativistic:1", 1.3)
    lim = c.psi_at_lambda2 / (c.lam2 * c.dpsi_at_lambda2)
    assert c.psi_lambda_at_lambda2 == pytest.approx(lim, rel=1e-15)
    near = psi_lambda(c, c.lam2 * (1 + np.array([-1e-9, 0.0, 1e-9])))
    np.testing.assert_allclose(near, lim, rtol=1e-8)
    z = psi_lambda(c, np.array([c.lam2 * (1 + 1e-9)], dtype=complex))
    assert z[0] == pytest.approx(lim, rel=1e-8)


def test_non_cbf_model_is_rejected():
    m = model("stable:1")
    flat = dataclasses.replace(m, ddiff=lambda a, b: np.zeros(np.broadcast(a, b).shape))
    c = make_context(m, 1.0)
    c = dataclasses.replace(c, model=flat)
    with pytest.raises(NonCbfError):
        psi_lambda(c, 2.0)
    dead = dataclasses.replace(m, deriv1=lambda x: 0.0 * np.asarray(x))
    with pytest.raises(NonCbfError):
        make_context(dead, 1.0)


def test_dagger_of_identity_constant_and_power():
    xi = np.array([0.1, 1.0, 7.5])
    np.testing.assert_allclose(psi_dagger(lambda x: x, xi), xi, rtol=1e-10)
    np.testing.assert_allclose(psi_dagger(lambda x: 3.0 + 0 * x, xi), math.sqrt(3.0), rtol=1e-10)
    assert psi_dagger(lambda x: x**0.6, 2.0) == pytest.approx(2**0.6, rel=1e-10)
    assert 2**0.6 == pytest.approx(1.51572, abs=1e-5)


def test_dagger_complex_argument_power():
    z = 1.5 * np.exp(0.6j * math.pi)
    assert psi_dagger(lambda x: np.power(x + 0j, 0.7), z) == pytest.approx(z**0.7, rel=1e-9)


@pytest.mark.parametrize("text, lam", [("stable:1.5", 0.5), ("stable:1.5", 2.0),
                                       ("relativistic:1", 0.5), ("relativistic:1", 2.0),
                                       ("gamma", 1.0), ("log-log", 3.0)])
def test_factorization_on_imaginary_axis(text, lam):
    c = ctx(text, lam)
    xi = np.geomspace(lam / 100, 100 * lam, 20)
    lhs = np.abs(psi_lambda_dagger(c, 1j * xi + 1e-6 * xi)) ** 2
    np.testing.assert_allclose(lhs / psi_lambda(c, xi**2), 1.0, atol=1e-6)


@pytest.mark.parametrize("text", ["stable:0.5", "relativistic:1", "gamma", "cp-exp"])
def test_dagger_at_zero_is_one(text):
    c = ctx(text, 1.3)
    # psi_dagger - 1 decays like a power of xi, so probe deep
    assert psi_lambda_dagger(c, 1e-20) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("text", ["stable:1", "stable:1.5", "relativistic:1", "gamma"])
def test_dagger_at_i_lambda_carries_phase(text):
    c = ctx(text, 1.1)
    v = psi_lambda_dagger_boundary(c, c.lam)
    assert abs(v) == pytest.approx(math.sqrt(c.psi_lambda_at_lambda2), rel=1e-6)
    assert np.angle(v) == pytest.approx(c.theta, abs=1e-6)


@pytest.mark.parametrize("text", ["stable:1.2", "relativistic:0.5", "gamma", "log-log", "cp-exp"])
def test_dagger_nondecreasing_and_bounded(text):
    c = ctx(text, 0.9)
    xi = np.geomspace(1e-4, 1e4, 60)
    d = psi_lambda_dagger_real(c, xi, level=6)
    assert np.all(np.diff(d) >= -1e-12 * d[1:])
    A = math.sqrt(c.psi_at_lambda2 / (c.lam2 * c.dpsi_at_lambda2))
    B = math.sqrt(c.psi_at_lambda2 * abs(c.d2psi_at_lambda2) / (2 * c.lam2 * c.dpsi_at_lambda2**2))
    z = (xi[::6, None] * np.exp(1j * np.linspace(-0.45, 0.45, 7) * math.pi)[None, :]).ravel()
    assert np.all(np.abs(psi_lambda_dagger(c, z)) <= np.abs(A + B * z) * (1 + 1e-9))


def test_fixed_rule_dagger_matches_adaptive():
    c = ctx("relativistic:1", 0.7)
    xi = np.array([1e-3, 0.3, 0.7, 5.0, 300.0])
    np.testing.assert_allclose(psi_lambda_dagger_real(c, xi, level=6), psi_lambda_dagger(c, xi), rtol=1e-10)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
def test_stable_phase_shift(alpha, lam):
    assert ctx(f"stable:{alpha}", lam).theta == pytest.approx((2 - alpha) * math.pi / 8, abs=1e-8)


def test_phase_shift_references(oracle):
    for lam in (0.3, 1.0, 2.0):
        assert ctx("cp-exp", lam).theta == pytest.approx(math.atan(lam), abs=1e-10)
    for k, v in oracle["relativistic_theta"].items():
        assert ctx("relativistic:1", float(k)).theta == pytest.approx(v, abs=1e-9)
    for k, v in oracle["gamma_theta"].items():
        assert ctx("gamma", float(k)).theta == pytest.approx(v, abs=1e-9)
    t8 = ctx("log-log", 8.0).theta
    assert t8 == pytest.approx(oracle["loglog_theta_8"], abs=1e-9)
    assert 0.286 * math.pi < t8 < 0.288 * math.pi
    assert t8 > math.pi / 4


def test_phase_shift_trends():
    lams = [0.01, 0.1, 1.0, 10.0, 100.0, 1e4]
    rel = [ctx("relativistic:1", l).theta for l in lams]
    gam = [ctx("gamma", l).theta for l in lams]
    assert np.all(np.diff(rel) > 0) and rel[0] < 0.01 and rel[-1] < math.pi / 8
    assert math.pi / 8 - rel[-1] < 1e-3
    assert np.all(np.diff(gam) > 0) and gam[-1] < math.pi / 4
    drift = [ctx("stable-drift:1:1", l).theta for l in lams]
    assert np.all(np.diff(drift) < 0) and drift[0] < math.pi / 8


@pytest.mark.parametrize("text", ["stable:0.7", "relativistic:1", "gamma", "log-log", "cp-exp",
                                  "stable-drift:1.2:0.3"])
def test_phase_shift_below_log_slope_bound(text):
    c = ctx(text, 1.7)
    xs = np.geomspace(1e-8, 1e8, 2001)
    sup = float(np.max(psi_lambda_log_slope(c, xs)))
    assert c.theta <= math.pi / 2 * sup + 1e-10


def test_normalisation_constant():
    assert ctx("brownian", 3.0).c_lambda == pytest.approx(3.0, rel=1e-15)
    for a in (0.5, 1.0, 1.7):
        assert ctx(f"stable:{a}", 1.0).c_lambda == pytest.approx(math.sqrt(a / 2), rel=1e-14)
    assert ctx("cp-exp", 1.0).c_lambda == pytest.approx(1 / math.sqrt(2), rel=1e-14)


@given(st.sampled_from(["stable:0.4", "stable:1.9", "relativistic:2", "gamma", "log-log",
                        "cp-exp", "rational:5,1;1,5", "stable-drift:0.8:2"]),
       st.floats(-4, 4))
def test_phase_shift_range_and_positivity(text, loglam):
    c = ctx(text, 10**loglam)
    assert 0 <= c.theta < math.pi / 2
    assert c.c_lambda > 0
    xs = np.geomspace(1e-6, 1e6, 50) * c.lam2
    assert np.all(psi_lambda(c, xs) > 0)
