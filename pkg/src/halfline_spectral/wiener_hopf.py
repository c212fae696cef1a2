"""Half-plane factorization of the regularised exponent.

For a CBF ``psi`` and ``lam > 0`` the regularised exponent is

    psi_lam(x) = (1 - x/lam^2) / (1 - psi(x)/psi(lam^2)),

and the dagger transform of a positive function ``f`` on (0, inf) is

    f_dag(xi) = exp( (1/pi) int_0^inf xi log f(z^2) / (xi^2 + z^2) dz ),  Re xi > 0.

Both dagger integrals are split at ``z = |xi|`` and the upper piece is mapped
back to (0, 1) by ``z -> |xi|/s``, so tanh-sinh sees two integrals on (0, 1).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cbf_model import LaplaceExponent
from .config import DEFAULT
from .numerics import QuadratureResult, integrate_de, tanh_sinh_rule

__all__ = [
    "NonCbfError",
    "WhContext",
    "make_context",
    "psi_lambda",
    "log_psi_lambda_sq",
    "psi_dagger",
    "psi_lambda_dagger",
    "psi_lambda_dagger_real",
    "psi_lambda_dagger_boundary",
    "compute_theta",
    "theta",
    "c_lambda",
    "psi_lambda_log_slope",
]

_ARG_MAX = 1e300
_SQRT_ARG_MAX = 1e150
# below this distance from z = 1 the theta integrand is replaced by its limit
_THETA_CUT = 1e-5


class NonCbfError(ArithmeticError):
    """The model violates a property every CBF has."""


@dataclass(frozen=True)
class WhContext:
    model: LaplaceExponent
    lam: float
    lam2: float
    psi_at_lambda2: float
    dpsi_at_lambda2: float
    d2psi_at_lambda2: float
    log_scale: float          # log(psi(lam^2)/lam^2)
    theta: float
    theta_error: float
    c_lambda: float

    @property
    def psi_lambda_at_lambda2(self) -> float:
        return self.psi_at_lambda2 / (self.lam2 * self.dpsi_at_lambda2)


def make_context(model: LaplaceExponent, lam: float, tol=None) -> WhContext:
    lam = float(lam)
    if not (lam > 0 and math.isfinite(lam)):
        raise ValueError(f"lambda must be positive and finite, got {lam!r}")
    lam2 = lam * lam
    p = float(model.eval(lam2))
    d1 = float(model.deriv1(lam2))
    d2 = float(model.deriv2(lam2))
    if not p > 0:
        raise NonCbfError(f"psi(lambda^2) = {p!r} must be positive")
    if not d1 > 0:
        raise NonCbfError(f"psi'(lambda^2) = {d1!r} must be positive")
    th = compute_theta(model, lam, tol)
    return WhContext(
        model=model,
        lam=lam,
        lam2=lam2,
        psi_at_lambda2=p,
        dpsi_at_lambda2=d1,
        d2psi_at_lambda2=d2,
        log_scale=math.log(p) - math.log(lam2),
        theta=float(th.value),
        theta_error=th.abs_error_estimate,
        c_lambda=math.sqrt(lam2 * lam2 * d1 / p),
    )


# ---------------------------------------------------------------------------
# regularised exponent


def _ddiff_checked(model, a, lam2):
    d = model.ddiff(a, lam2)
    if np.any(~(d > 0)):
        bad = np.asarray(a)[np.broadcast_to(~(d > 0), np.shape(a))] if np.ndim(a) else a
        raise NonCbfError(f"psi(x) - psi(lambda^2) does not have the sign of x - lambda^2 "
                          f"at x = {np.ravel(bad)[0] if np.ndim(bad) else bad!r}")
    return d


def log_psi_lambda_sq(ctx: WhContext, z):
    """``log psi_lam(z**2)`` for real ``z >= 0``."""
    s = np.square(np.minimum(np.asarray(z, dtype=float), _SQRT_ARG_MAX))
    return ctx.log_scale - np.log(_ddiff_checked(ctx.model, s, ctx.lam2))


def psi_lambda(ctx: WhContext, xi):
    """Regularised exponent at real ``xi >= 0`` or complex ``xi`` off the cut."""
    if np.iscomplexobj(xi):
        z = np.asarray(xi, dtype=complex)
        lam2 = ctx.lam2
        near = np.abs(z - lam2) < DEFAULT.removable_rel * lam2
        zs = np.where(near, lam2 + 1.0, z)
        val = (ctx.psi_at_lambda2 / lam2) * (lam2 - zs) / (
            ctx.psi_at_lambda2 - ctx.model.eval_complex(zs))
        return np.where(near, ctx.psi_lambda_at_lambda2 + 0j, val)
    x = np.asarray(xi, dtype=float)
    if np.any(x < 0):
        raise ValueError("psi_lambda takes x >= 0 on the real line")
    out = math.exp(ctx.log_scale) / _ddiff_checked(ctx.model, x, ctx.lam2)
    if ctx.model.psi0 == 0.0:
        out = np.where(x == 0.0, 1.0, out)
        out = out if out.ndim else out[()]
    return out


def psi_lambda_log_slope(ctx: WhContext, x):
    """``x psi_lam'(x) / psi_lam(x)`` for real ``x > 0``."""
    x = np.asarray(x, dtype=float)
    m = ctx.model
    lam2 = ctx.lam2
    D = m.ddiff(x, lam2)
    near = np.abs(x - lam2) < 1e-4 * lam2
    xs = np.where(near, 2.0 * lam2, x)
    Ds = np.where(near, 1.0, D)
    far = xs * (Ds - m.deriv1(xs)) / ((xs - lam2) * Ds)
    # at x = lam^2: -x D'/D with D' = psi''/2
    at = -lam2 * 0.5 * m.deriv2(lam2) / m.deriv1(lam2)
    return np.where(near, at, far)


# ---------------------------------------------------------------------------
# dagger transform


def _check_log_tail(logf_sq: Callable):
    z = np.array([1e-8, 1e-4, 1.0, 1e4, 1e8])
    v = np.asarray(logf_sq(z), dtype=complex)
    if not np.all(np.isfinite(v)):
        raise ValueError("log psi is not finite on sample points; dagger transform undefined")
    if abs(v[-1]) > 1e8 or abs(v[0]) > 1e8:
        raise ValueError("log psi grows too fast for the dagger integral to converge")


def _dagger_pieces(logf_sq, xi: complex):
    r = abs(xi)

    def head(u):
        return xi * r * logf_sq(r * u) / (xi * xi + r * r * u * u)

    def tail(s):
        return xi * r * logf_sq(r / s) / (xi * xi * s * s + r * r)

    return head, tail


def _dagger2_pieces(logf, xi: complex):
    # extension to the slit plane: int_0^inf sqrt(xi) log f(xi s^2)/(xi + s^2) ds
    r = abs(xi)
    rq = math.sqrt(r)
    sq = cmath.sqrt(xi)

    def head(u):
        return sq * rq * logf(xi * r * u * u) / (xi + r * u * u)

    def tail(s):
        return sq * rq * logf(xi * r / (s * s)) / (xi * s * s + r)

    return head, tail


def _dagger_log(pieces, tol, rtol):
    head, tail = pieces
    out = []
    for g in (head, tail):
        res = integrate_de(g, 0.0, 1.0, tol, rtol)
        if not res.converged:
            raise ArithmeticError(
                f"dagger integral did not converge (partial value {res.value!r}, "
                f"error estimate {res.abs_error_estimate:.3g})")
        out.append(res)
    val = (out[0].value + out[1].value) / math.pi
    err = (out[0].abs_error_estimate + out[1].abs_error_estimate) / math.pi
    return val, err


def psi_dagger(psi: Callable, xi, tol=None, rtol=None):
    """Dagger transform of a positive function ``psi`` at ``xi``.

    For ``Re xi > 0`` only real arguments of ``psi`` are used.  Elsewhere in
    the slit plane ``psi`` must accept complex input (holomorphic extension).
    """
    tol = 1e-12 if tol is None else tol
    rtol = 1e-10 if rtol is None else rtol

    def logf_sq(z):
        return np.log(psi(np.minimum(np.square(z), _ARG_MAX)))

    _check_log_tail(logf_sq)
    return _dagger_map(xi, lambda x: _dagger_pieces(logf_sq, x),
                       lambda x: _dagger2_pieces(lambda w: np.log(psi(w)), x), tol, rtol)


def _dagger_map(xi, right, left, tol, rtol):
    arr = np.asarray(xi)
    out = np.empty(arr.shape, dtype=complex)
    for idx, x in np.ndenumerate(arr):
        x = complex(x)
        if x.imag == 0 and x.real <= 0:
            if x.real == 0:
                raise ValueError("the dagger transform is defined on the open slit plane")
            raise ValueError(f"xi = {x!r} lies on the cut (-inf, 0]")
        pieces = right(x) if x.real > 0 else left(x)
        val, _ = _dagger_log(pieces, tol, rtol)
        out[idx] = cmath.exp(val)
    if not np.iscomplexobj(arr) and np.all(arr.real > 0):
        out = out.real
    return out if out.ndim else out[()]


def psi_lambda_dagger(ctx: WhContext, xi, tol=None, rtol=None):
    """Dagger transform of ``psi_lam`` at ``xi`` (adaptive, any ``xi`` off the cut)."""
    tol = 1e-12 if tol is None else tol
    rtol = 1e-10 if rtol is None else rtol

    def logf_sq(z):
        return log_psi_lambda_sq(ctx, z)

    def logf(w):
        return np.log(psi_lambda(ctx, np.asarray(w, dtype=complex)))

    return _dagger_map(xi, lambda x: _dagger_pieces(logf_sq, x),
                       lambda x: _dagger2_pieces(logf, x), tol, rtol)


def psi_lambda_dagger_real(ctx: WhContext, xi, level: int = 5):
    """Dagger transform of ``psi_lam`` at real ``xi > 0`` with a fixed rule.

    Vectorized: one tanh-sinh rule of step ``2**-level`` for every ``xi``.
    """
    x = np.atleast_1d(np.asarray(xi, dtype=float))
    if np.any(x <= 0):
        raise ValueError("xi must be positive")
    u, _, w = tanh_sinh_rule(level)
    out = np.empty_like(x)
    k = 1.0 / (1.0 + u * u)
    step = max(1, 200000 // u.size)
    for i in range(0, x.size, step):
        xs = x[i:i + step, None]
        lo = log_psi_lambda_sq(ctx, xs * u[None, :])
        hi = log_psi_lambda_sq(ctx, xs / u[None, :])
        out[i:i + step] = ((lo + hi) * (w * k)[None, :]).sum(axis=1) / math.pi
    res = np.exp(out)
    return res if np.ndim(xi) else res[0]


def psi_lambda_dagger_boundary(ctx: WhContext, eta, eps_rel: float = 1e-6, tol=None, rtol=None):
    """Boundary value of the dagger transform at ``i*eta`` from the right.

    Evaluated at ``i eta + e`` and ``i eta + e/2`` with ``e = eps_rel*max(eta, lam)``
    and combined by one Richardson step.
    """
    eta = np.asarray(eta, dtype=float)
    e = eps_rel * np.maximum(eta, ctx.lam)
    f1 = psi_lambda_dagger(ctx, 1j * eta + e, tol, rtol)
    f2 = psi_lambda_dagger(ctx, 1j * eta + 0.5 * e, tol, rtol)
    return 2.0 * f2 - f1


# ---------------------------------------------------------------------------
# phase shift and normalisation


def compute_theta(model: LaplaceExponent, lam: float, tol=None) -> QuadratureResult:
    """Phase shift as (1/pi) int_0^1 log(psi_lam(lam^2/z^2)/psi_lam(lam^2 z^2)) dz/(1-z^2)."""
    lam2 = float(lam) ** 2
    limit = lam2 * abs(float(model.deriv2(lam2))) / float(model.deriv1(lam2))
    tol = 1e-13 if tol is None else tol

    def integrand(z):
        z = np.asarray(z, dtype=float)
        near = (1.0 - z) < _THETA_CUT
        zz = np.where(near, 0.5, z)
        a = model.ddiff(lam2 * zz * zz, lam2)
        b = model.ddiff(np.minimum(lam2 / (zz * zz), _ARG_MAX), lam2)
        if np.any(~(a > 0)) or np.any(~(b > 0)):
            raise NonCbfError("divided difference of psi is not positive")
        val = (np.log(a) - np.log(b)) / ((1.0 - zz) * (1.0 + zz))
        return np.where(near, limit, val) / math.pi

    res = integrate_de(integrand, 0.0, 1.0, tol, 1e-12)
    th = float(res.value)
    slack = max(res.abs_error_estimate, 1e-12)
    if th < -slack or th >= math.pi / 2:
        raise ArithmeticError(f"phase shift {th!r} outside [0, pi/2) at lambda = {lam!r}")
    return QuadratureResult(max(th, 0.0), res.abs_error_estimate, res.nodes_used, res.converged)


def theta(ctx: WhContext) -> float:
    return ctx.theta


def c_lambda(ctx: WhContext) -> float:
    return ctx.c_lambda
