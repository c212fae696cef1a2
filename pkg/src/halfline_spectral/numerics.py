"""Quadrature kernels.

Double-exponential rules handle endpoint singularities (tanh-sinh on a
finite interval, exp-sinh on a half line).  Oscillatory integrals over
(0, inf) are cut at a point where a user-supplied envelope has negligible
tail mass and split into panels integrated with Gauss-Legendre rules.

Integrands are called with numpy arrays of abscissae and must return arrays
of the same shape (real or complex).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.integrate import simpson

from .config import DEFAULT

__all__ = [
    "QuadratureResult",
    "QuadratureError",
    "OscillatorySpec",
    "integrate_de",
    "integrate_panels",
    "integrate_oscillatory",
    "laplace_of_sampled",
    "tanh_sinh_rule",
    "exp_sinh_rule",
    "gauss_legendre",
]

# nodes never come closer to a finite endpoint than this (relative to length)
_MIN_OFFSET = 1e-100
_U_MAX = 0.5 * math.log(1.0 / _MIN_OFFSET)
_T_FINITE = math.asinh(_U_MAX * 2.0 / math.pi)
_T_HALF = math.asinh(2.0 * _U_MAX * 2.0 / math.pi)


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    abs_error_estimate: float
    nodes_used: int
    converged: bool
    tail_bound: float = 0.0
    truncation: Optional[float] = None

    def __float__(self):
        return float(np.real(self.value))


class QuadratureError(ArithmeticError):
    """The integrand returned a non-finite value at a quadrature node."""

    def __init__(self, x, value):
        self.abscissa = x
        self.value = value
        super().__init__(f"integrand is not finite at x = {x!r} (value {value!r})")


def _tols(tol, rtol):
    return (DEFAULT.abs_tol if tol is None else tol), (DEFAULT.rel_tol if rtol is None else rtol)


# ---------------------------------------------------------------------------
# double-exponential rules


def _level_t(level: int, tmax: float) -> np.ndarray:
    """Abscissae in t that are new at ``level`` (all integers at level 0)."""
    if level == 0:
        n = int(math.floor(tmax))
        return np.arange(-n, n + 1, dtype=float)
    h = 2.0 ** -level
    n = int(math.floor((tmax / h - 1.0) / 2.0))
    if n < 0:
        return np.empty(0)
    k = np.arange(0, n + 1, dtype=float)
    pos = (2.0 * k + 1.0) * h
    return np.concatenate([-pos[::-1], pos])


def _ts_map(t, a, b):
    L = b - a
    u = 0.5 * math.pi * np.sinh(t)
    e = np.exp(-2.0 * np.abs(u))
    off = L * e / (1.0 + e)
    x = np.where(t < 0, a + off, b - off)
    x = np.where(t == 0, a + 0.5 * L, x)
    w = L * math.pi * np.cosh(t) * e / (1.0 + e) ** 2
    return x, w


def _es_map(t, a, scale):
    u = 0.5 * math.pi * np.sinh(t)
    ex = scale * np.exp(u)
    return a + ex, ex * 0.5 * math.pi * np.cosh(t)


def tanh_sinh_rule(level: int):
    """Full tanh-sinh rule on (0, 1) with step 2**-level.

    Returns ``(x, one_minus_x, w)``; ``one_minus_x`` is accurate near 1.
    """
    return _tanh_sinh_rule(int(level))


@lru_cache(maxsize=None)
def _tanh_sinh_rule(level):
    h = 2.0 ** -level
    n = int(math.floor(_T_FINITE / h))
    t = np.arange(-n, n + 1) * h
    u = 0.5 * math.pi * np.sinh(t)
    e = np.exp(-2.0 * np.abs(u))
    small = e / (1.0 + e)
    x = np.where(t < 0, small, 1.0 - small)
    c = np.where(t < 0, 1.0 - small, small)
    w = h * math.pi * np.cosh(t) * e / (1.0 + e) ** 2
    for arr in (x, c, w):
        arr.setflags(write=False)
    return x, c, w


def exp_sinh_rule(level: int, umin: float = -2 * _U_MAX, umax: float = 2 * _U_MAX):
    """Exp-sinh rule on (0, inf): ``x = exp((pi/2) sinh t)``.

    ``umin``/``umax`` bound ``log x``.  Returns ``(x, w)``.
    """
    return _exp_sinh_rule(int(level), float(umin), float(umax))


@lru_cache(maxsize=64)
def _exp_sinh_rule(level, umin, umax):
    h = 2.0 ** -level
    tlo = math.asinh(umin * 2.0 / math.pi)
    thi = math.asinh(umax * 2.0 / math.pi)
    t = np.arange(math.ceil(tlo / h), math.floor(thi / h) + 1) * h
    u = 0.5 * math.pi * np.sinh(t)
    x = np.exp(u)
    w = h * x * 0.5 * math.pi * np.cosh(t)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def integrate_de(f: Callable, a: float, b: float, tol: float = None, rtol: float = None, *,
                 scale: float = 1.0, max_level: int = None, max_nodes: int = None,
                 min_level: int = 3) -> QuadratureResult:
    """Integrate ``f`` over (a, b) with a double-exponential rule.

    Finite intervals use tanh-sinh; ``b = inf`` uses exp-sinh with
    ``x = a + scale * exp((pi/2) sinh t)``.  The step is halved until two
    successive estimates differ by at most ``tol + rtol*|value|``.

    Parameters
    ----------
    f : callable
        Vectorized integrand.
    a, b : float
        Limits, ``a`` finite, ``b`` finite or ``inf``.
    tol, rtol : float, optional
        Absolute and relative tolerance (library defaults if omitted).

    Raises
    ------
    QuadratureError
        If the integrand is NaN or infinite at some node.
    """
    tol, rtol = _tols(tol, rtol)
    max_level = DEFAULT.de_max_level if max_level is None else max_level
    max_nodes = DEFAULT.de_max_nodes if max_nodes is None else max_nodes
    if not math.isfinite(a):
        raise ValueError("lower limit must be finite")
    if a == b:
        return QuadratureResult(0.0, 0.0, 0, True)
    if b < a:
        r = integrate_de(f, b, a, tol, rtol, scale=scale, max_level=max_level,
                         max_nodes=max_nodes, min_level=min_level)
        return QuadratureResult(-r.value, r.abs_error_estimate, r.nodes_used, r.converged)
    infinite = math.isinf(b)
    tmax = _T_HALF if infinite else _T_FINITE
    total = 0.0
    nodes = 0
    prev = None
    value = 0.0
    err = math.inf
    for level in range(max_level + 1):
        t = _level_t(level, tmax)
        if infinite:
            x, w = _es_map(t, a, scale)
            keep = np.isfinite(x) & (x > a)
        else:
            x, w = _ts_map(t, a, b)
            keep = (x > a) & (x < b)
        x, w = x[keep], w[keep]
        if x.size:
            fx = np.broadcast_to(np.asarray(f(x)), x.shape)
            bad = ~np.isfinite(fx)
            if bad.any():
                i = int(np.argmax(bad))
                raise QuadratureError(float(x[i]), fx[i])
            total = total + np.sum(w * fx)
            nodes += x.size
        value = total * 2.0 ** -level
        if prev is not None and level >= min_level:
            err = float(abs(value - prev))
            if err <= tol + rtol * abs(value):
                return QuadratureResult(value, err, nodes, True)
        prev = value
        if nodes >= max_nodes:
            break
    return QuadratureResult(value, err, nodes, False)


# ---------------------------------------------------------------------------
# panel rules


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    """Gauss-Legendre nodes and weights on (0, 1)."""
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def integrate_panels(f: Callable, edges, n: int = None) -> QuadratureResult:
    """Composite Gauss-Legendre over consecutive panels.

    Each panel uses ``n`` nodes; the error estimate is the sum over panels of
    the difference to an ``n//2``-node rule on the same panel.
    """
    n = DEFAULT.panel_nodes if n is None else n
    edges = np.asarray(edges, dtype=float)
    if edges.size < 2:
        return QuadratureResult(0.0, 0.0, 0, True)
    lo, width = edges[:-1], np.diff(edges)
    vals = []
    for m in (n, max(n // 2, 2)):
        x, w = gauss_legendre(m)
        xs = lo[:, None] + width[:, None] * x[None, :]
        fx = np.asarray(f(xs.ravel())).reshape(xs.shape)
        bad = ~np.isfinite(fx)
        if bad.any():
            i = np.unravel_index(int(np.argmax(bad)), bad.shape)
            raise QuadratureError(float(xs[i]), fx[i])
        vals.append((fx * w[None, :]).sum(axis=1) * width)
    fine, coarse = vals
    err = float(np.abs(fine - coarse).sum())
    return QuadratureResult(fine.sum(), err, int(edges.size - 1) * (n + max(n // 2, 2)), True)


@dataclass(frozen=True)
class OscillatorySpec:
    """Envelope and oscillation rate of an integrand on (0, inf).

    ``envelope(lam) >= |f(lam)|`` must be vectorized and eventually
    decreasing.  ``truncation_tail_bound`` optionally maps a cut point ``L``
    to an upper bound of the envelope mass beyond ``L``; by default that mass
    is integrated numerically.
    """

    envelope: Callable
    frequency_hint: float
    truncation_tail_bound: Optional[Callable] = None

    def tail(self, L: float) -> float:
        if self.truncation_tail_bound is not None:
            return float(self.truncation_tail_bound(L))
        r = integrate_de(self.envelope, L, math.inf, 1e-15, 1e-6, scale=max(L, 1e-300))
        return float(abs(r.value))


def truncation_point(spec: OscillatorySpec, target: float, start: float,
                     max_doublings: int = 200):
    """Smallest L (to 1e-3 relative) whose envelope tail is at most ``target``."""
    L = start
    t = spec.tail(L)
    k = 0
    while t > target:
        if k >= max_doublings or not math.isfinite(L):
            return L, t, False
        L *= 2.0
        t = spec.tail(L)
        k += 1
    lo, hi = (L / 2.0 if k else 0.0), L
    while hi - lo > 1e-3 * hi:
        mid = 0.5 * (lo + hi)
        if mid <= 0:
            break
        if spec.tail(mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi, spec.tail(hi), True


def integrate_oscillatory(f: Callable, spec: OscillatorySpec, tol: float = None,
                          rtol: float = None, *, n: int = None,
                          max_panels: int = None) -> QuadratureResult:
    """Integrate ``f`` over (0, inf) by truncation plus Gauss panels.

    The cut point L has envelope tail below ``tol/10``; panels have width
    ``pi/frequency_hint`` (at most L/4); the first panel is integrated with
    tanh-sinh to absorb a singularity at 0.  The panel rule is refined
    (node count doubled, up to 4x) until the error budget is met.
    """
    tol, rtol = _tols(tol, rtol)
    n = DEFAULT.panel_nodes if n is None else n
    max_panels = DEFAULT.max_panels if max_panels is None else max_panels
    if not spec.frequency_hint > 0:
        raise ValueError("frequency_hint must be positive")
    width0 = math.pi / spec.frequency_hint
    L, tail, ok = truncation_point(spec, tol / 10.0, width0)
    width = min(width0, L / 4.0)
    npan = int(math.ceil(L / width))
    converged = ok
    if npan > max_panels:
        npan = max_panels
        converged = False
    L = npan * width
    tail = spec.tail(L)
    first = integrate_de(f, 0.0, width, tol / 4.0, rtol / 4.0)
    converged &= first.converged
    edges = width * np.arange(1, npan + 1)
    rest = QuadratureResult(0.0, 0.0, 0, True)
    m = n
    for _ in range(3):
        rest = integrate_panels(f, edges, m)
        value = first.value + rest.value
        err = first.abs_error_estimate + rest.abs_error_estimate + tail
        if err <= tol + rtol * abs(value):
            break
        m *= 2
    value = first.value + rest.value
    err = first.abs_error_estimate + rest.abs_error_estimate + tail
    converged &= err <= tol + rtol * abs(value)
    return QuadratureResult(value, err, first.nodes_used + rest.nodes_used, bool(converged),
                            tail_bound=tail, truncation=L)


# ---------------------------------------------------------------------------


def laplace_of_sampled(xs, fs, xi: float, tol: float = 1e-10) -> float:
    """Laplace transform at ``xi`` of a bounded function sampled on [0, X].

    Composite Simpson on the (possibly graded) grid; the neglected tail is at
    most ``max|f| exp(-xi X)/xi`` and must not exceed ``tol``.
    """
    xs = np.asarray(xs, dtype=float)
    fs = np.asarray(fs)
    if xs.ndim != 1 or xs.shape != fs.shape or xs.size < 3:
        raise ValueError("need matching 1-D sample arrays with at least 3 points")
    if xs[0] != 0.0:
        raise ValueError("grid must start at x = 0")
    if not np.all(np.diff(xs) > 0):
        raise ValueError("grid must be strictly increasing")
    if not xi > 0:
        raise ValueError("xi must be positive")
    M = float(np.max(np.abs(fs)))
    X = float(xs[-1])
    if M > 0 and M * math.exp(-xi * X) / xi > tol:
        need = math.log(M / (xi * tol)) / xi
        raise ValueError(f"grid ends at X = {X:.6g}; xi = {xi:.6g} and tol = {tol:.3g} "
                         f"need X >= {need:.6g}")
    return simpson(np.exp(-xi * xs) * fs, x=xs)
