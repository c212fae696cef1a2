"""Generalized eigenfunctions of the killed process.

For each ``lam > 0``

    F_lam(x) = sin(lam x + theta_lam) - G_lam(x),

where ``G_lam`` is the Laplace transform of a finite measure with density

    gamma_lam(xi) = (1/pi) sqrt(psi_lam(lam^2)) / psi_lam_dag(xi)
                    * Im[ lam psi'(lam^2) / (psi(lam^2) - psi(-xi^2 + i0)) ].

The density is discretized once per ``lam`` on a double-exponential rule in
``xi`` (segments between branch points of the boundary values, exp-sinh on
the last, unbounded one).  ``G`` at any ``x`` is then a weighted sum of
exponentials, so many ``x`` are evaluated at once.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import gamma as gamma_fn

from .cbf_model import LaplaceExponent
from .numerics import exp_sinh_rule, tanh_sinh_rule
from .wiener_hopf import (
    WhContext,
    make_context,
    psi_lambda_dagger,
    psi_lambda_dagger_real,
)

__all__ = [
    "AtomError",
    "Eigenfunction",
    "boundary_values",
    "find_atoms",
]

_EPS_SEQ = (1e-4, 1e-5, 1e-6)


class AtomError(ArithmeticError):
    """The boundary values hit psi(lam^2): the measure gamma_lam has an atom."""

    def __init__(self, location: float, lam: float):
        self.location = float(location)
        self.lam = float(lam)
        super().__init__(f"gamma_lambda has an atom at xi = {self.location:.12g} "
                         f"(psi(-xi^2 + i0) = psi(lambda^2) for lambda = {self.lam:.12g})")


@dataclass(frozen=True)
class FallbackDiagnostics:
    worst_discrepancy: float
    where: float


def boundary_values(model: LaplaceExponent, s, *, return_diag: bool = False):
    """``psi(-s + i0)`` for ``s > 0``.

    Uses the model's closed form when present.  Otherwise evaluates
    ``psi(-s + i e s)`` for ``e`` in (1e-4, 1e-5, 1e-6) and
    extrapolates linearly in ``e`` from each consecutive pair; the two
    extrapolations should agree to 1e-4 relative.
    """
    s = np.asarray(s, dtype=float)
    if model.boundary_upper is not None:
        out = model.boundary_upper(s)
        return (out, None) if return_diag else out
    scale = s
    vals = [model.eval_complex(-s + 1j * e * scale) for e in _EPS_SEQ]
    r1 = (10.0 * vals[1] - vals[0]) / 9.0
    r2 = (10.0 * vals[2] - vals[1]) / 9.0
    ref = np.maximum(np.abs(r2), np.abs(model.eval(s)))
    disc = np.abs(r1 - r2) / np.where(ref > 0, ref, 1.0)
    if return_diag:
        i = int(np.argmax(disc)) if disc.size else 0
        diag = FallbackDiagnostics(float(np.max(disc)) if disc.size else 0.0,
                                   float(np.ravel(s)[i]) if disc.size else math.nan)
        return r2, diag
    return r2


def find_atoms(model: LaplaceExponent, lam: float, n: int = 4000):
    """Locations ``xi > 0`` with ``psi(-xi^2 + i0) = psi(lam^2)``.

    Scans a log grid of ``xi`` for sign changes of the real part of
    ``psi(lam^2) - psi(-xi^2 + i0)`` where the boundary value is real, then
    polishes each bracket and discards poles.
    """
    c = float(model.eval(lam * lam))
    pts = [np.logspace(math.log10(lam) - 6, math.log10(lam) + 6, n)]
    for bp in model.breakpoints:
        r = math.sqrt(bp)
        pts.append(r * (1.0 + np.concatenate([-np.logspace(-12, -1, 60), np.logspace(-12, -1, 60)])))
    xi = np.unique(np.concatenate(pts))
    xi = xi[xi > 0]

    def f(x):
        return c - boundary_values(model, np.array([x * x]))[0]

    with np.errstate(divide="ignore", invalid="ignore"):
        b = boundary_values(model, xi * xi)
        g = c - b
        real = np.abs(b.imag) <= 1e-12 * (1.0 + np.abs(b))
        re = g.real
        cand = np.nonzero(real[:-1] & real[1:] & np.isfinite(re[:-1]) & np.isfinite(re[1:])
                          & (np.sign(re[:-1]) * np.sign(re[1:]) < 0))[0]
    atoms = []
    for i in cand:
        a, bb = xi[i], xi[i + 1]
        try:
            root = brentq(lambda x: f(x).real, a, bb, xtol=1e-15, rtol=1e-15, maxiter=200)
        except ValueError:
            continue
        if abs(f(root)) <= 1e-8 * (1.0 + abs(c)):
            atoms.append(float(root))
    return atoms


class Eigenfunction:
    """``F_lam`` and its ingredients for one model and one ``lam``.

    Parameters
    ----------
    model : LaplaceExponent
    lam : float
        Spectral parameter.
    tol : float
        Target absolute accuracy of ``G``; the discretization of the measure
        is refined until two nested rules agree to this level.
    level : int
        Initial step ``2**-level`` of the rule in ``xi``.
    """

    def __init__(self, model: LaplaceExponent, lam: float, tol: float = 1e-9,
                 level: int = 5, dagger_level: int = 5, ctx: Optional[WhContext] = None,
                 max_level: int = 8):
        self.model = model
        self.lam = float(lam)
        self.ctx = ctx if ctx is not None else make_context(model, lam)
        self.tol = tol
        self.dagger_level = dagger_level
        self._level0 = level
        self._max_level = max_level
        self.atom_locations = tuple(find_atoms(model, self.lam))
        self._rule = None
        self.rule_error = math.nan
        self.fallback: Optional[FallbackDiagnostics] = None

    # ------------------------------------------------------------------ basic
    @property
    def theta(self) -> float:
        return self.ctx.theta

    @property
    def c_lambda(self) -> float:
        return self.ctx.c_lambda

    def _raise_if_atoms(self):
        if self.atom_locations:
            raise AtomError(self.atom_locations[0], self.lam)

    # ---------------------------------------------------------------- density
    def _density(self, xi):
        xi = np.asarray(xi, dtype=float)
        ctx = self.ctx
        b, diag = boundary_values(self.model, xi * xi, return_diag=True)
        im = b.imag
        out = np.zeros_like(xi)
        nz = im > 0
        if np.any(nz):
            re = ctx.psi_at_lambda2 - b.real[nz]
            q = im[nz] / (re * re + im[nz] * im[nz])
            dag = psi_lambda_dagger_real(ctx, xi[nz], self.dagger_level)
            pref = math.sqrt(ctx.psi_lambda_at_lambda2) * ctx.lam * ctx.dpsi_at_lambda2 / math.pi
            out[nz] = pref * q / dag
        return out, diag

    def gamma_density(self, xi):
        """Density of the measure whose Laplace transform is ``G_lam``."""
        x = np.asarray(xi, dtype=float)
        for a in self.atom_locations:
            if np.any(np.abs(x - a) <= 1e-9 * max(a, 1.0)):
                raise AtomError(a, self.lam)
        self._raise_if_atoms()
        val, _ = self._density(x)
        return val if np.ndim(xi) else float(val)

    # ------------------------------------------------------------------- rule
    def _segments(self):
        bps = sorted(math.sqrt(b) for b in self.model.breakpoints if b > 0)
        edges = [0.0] + bps
        segs = [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]
        segs.append((edges[-1], math.inf))
        return segs

    def _nodes(self, level):
        xs, ws = [], []
        for a, b in self._segments():
            if math.isinf(b):
                s = max(self.lam, a)
                x, w = exp_sinh_rule(level, -92.0, 150.0)
                xs.append(a + s * x)
                ws.append(s * w)
            else:
                u, c, w = tanh_sinh_rule(level)
                # keep both endpoint offsets accurate
                x = np.where(u < 0.5, a + (b - a) * u, b - (b - a) * c)
                keep = (x > a) & (x < b)
                xs.append(x[keep])
                ws.append((b - a) * w[keep])
        return np.concatenate(xs), np.concatenate(ws)

    def _probe(self, xi, W):
        xp = np.array([0.0, 1e-6, 1e-4, 1e-2, 1.0, 100.0]) / self.lam
        return np.exp(-np.outer(xp, xi)) @ W

    def _build_rule(self):
        self._raise_if_atoms()
        level = self._level0
        x0, w0 = self._nodes(level - 1)
        d0, _ = self._density(x0)
        prev = self._probe(x0, w0 * d0)
        while True:
            x, w = self._nodes(level)
            d, diag = self._density(x)
            W = w * d
            cur = self._probe(x, W)
            err = float(np.max(np.abs(cur[1:] - prev[1:])))
            if err <= self.tol or level >= self._max_level:
                break
            prev = cur
            level += 1
        keep = W != 0
        self._rule = (x[keep], W[keep])
        self.rule_error = err
        self.rule_level = level
        if diag is not None:
            self.fallback = diag
            if diag.worst_discrepancy > 1e-4:
                # discrepancies only matter where the density carries weight
                self._check_fallback(x[keep], W[keep])
        return self._rule

    def _check_fallback(self, x, W):
        s = x * x
        scale = s
        vals = [self.model.eval_complex(-s + 1j * e * scale) for e in _EPS_SEQ]
        r1 = (10.0 * vals[1] - vals[0]) / 9.0
        r2 = (10.0 * vals[2] - vals[1]) / 9.0
        ref = np.maximum(np.abs(r2), np.abs(self.model.eval(s)))
        bad = np.abs(r1 - r2) > 1e-4 * ref
        if np.sum(W[bad]) > 1e-4 * np.sum(W):
            i = int(np.argmax(np.where(bad, W, 0.0)))
            raise ArithmeticError(
                f"boundary values from the epsilon limit do not settle near xi = {x[i]:.6g}; "
                "supply closed-form boundary values for this model")

    @property
    def rule(self):
        """Nodes and weights ``(xi_k, W_k)`` with ``G(x) = sum W_k exp(-x xi_k)``."""
        if self._rule is None:
            self._build_rule()
        return self._rule

    # -------------------------------------------------------------- G and F
    def G(self, x):
        """``G_lam(x) = int exp(-x xi) gamma_lam(xi) dxi`` for ``x >= 0``."""
        xi, W = self.rule
        xa = np.asarray(x, dtype=float)
        if np.any(xa < 0):
            raise ValueError("G is defined for x >= 0")
        flat = xa.ravel()
        out = np.empty(flat.shape)
        step = max(1, 4_000_000 // max(xi.size, 1))
        for i in range(0, flat.size, step):
            out[i:i + step] = np.exp(-np.outer(flat[i:i + step], xi)) @ W if xi.size else 0.0
        out = out.reshape(xa.shape)
        if self.model.is_unbounded:
            # F(0+) = 0, so the full mass is sin(theta); the discretized tail
            # of gamma decays too slowly (1/log) for some models to rely on
            out = np.where(xa == 0.0, math.sin(self.theta), out)
        return out if np.ndim(x) else float(out)

    @property
    def gamma_total_mass(self) -> float:
        """``G_lam(0+)``."""
        if self.model.is_unbounded:
            self._raise_if_atoms()
            return math.sin(self.theta)
        return self.truncated_mass

    @property
    def truncated_mass(self) -> float:
        """Mass of the discretized measure (support cut near ``1e65 lam``)."""
        return float(np.sum(self.rule[1]))

    def G_integral(self) -> float:
        """``int_0^inf G_lam(x) dx = int gamma_lam(xi)/xi dxi``."""
        xi, W = self.rule
        return float(np.sum(W / xi))

    def sin_part(self, x):
        return np.sin(self.lam * np.asarray(x, dtype=float) + self.theta)

    def F(self, x):
        """``F_lam(x)`` for ``x >= 0``; the value at 0 is the right limit."""
        xa = np.asarray(x, dtype=float)
        val = self.sin_part(xa) - self.G(xa)
        if self.model.is_unbounded:
            val = np.where(xa == 0.0, 0.0, val)
        return val if np.ndim(x) else float(val)

    # -------------------------------------------------------- Laplace side
    def laplace_F(self, xi):
        """Closed-form Laplace transform ``c_lam psi_lam_dag(xi) / (lam^2 + xi^2)``."""
        z = np.asarray(xi)
        lam = self.lam
        if np.any(np.abs(z - 1j * lam) < 1e-9 * lam) or np.any(np.abs(z + 1j * lam) < 1e-9 * lam):
            raise ValueError("xi is too close to a pole at +-i lambda")
        if np.any(np.real(z) <= 0):
            raise ValueError("laplace_F needs Re xi > 0")
        if np.iscomplexobj(z):
            dag = psi_lambda_dagger(self.ctx, z)
        else:
            dag = psi_lambda_dagger(self.ctx, z.astype(float))
        out = self.c_lambda * dag / (lam * lam + z * z)
        return out if np.ndim(xi) else out[()]

    def laplace_F_at_zero(self) -> float:
        return math.sqrt(self.ctx.dpsi_at_lambda2 / self.ctx.psi_at_lambda2)

    # ---------------------------------------------------------- asymptotics
    def small_x_asymptote(self, x):
        """Leading behaviour of ``F_lam`` at 0 for regularly varying ``psi``."""
        m = self.model
        if m.rv_order is None or not m.is_unbounded:
            raise NotImplementedError(
                f"model {m.name} has no regular-variation order at infinity; "
                "small-x asymptote unsupported")
        x = np.asarray(x, dtype=float)
        ctx = self.ctx
        val = np.sqrt(ctx.lam2 * ctx.dpsi_at_lambda2 / m.eval(1.0 / (x * x))) / gamma_fn(
            1.0 + m.rv_order)
        return val if np.ndim(x) else float(val)

    # -------------------------------------------------------------- export
    def tabulate(self, xs):
        xs = np.asarray(xs, dtype=float)
        g = self.G(xs)
        s = self.sin_part(xs)
        f = s - g
        if self.model.is_unbounded:
            f = np.where(xs == 0.0, 0.0, f)
        return {"x": xs, "F": f, "sin_part": s, "G": g}

    def to_csv(self, xs) -> str:
        tab = self.tabulate(xs)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["x", "F", "sin_part", "G"])
        for row in zip(tab["x"], tab["F"], tab["sin_part"], tab["G"]):
            w.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()
