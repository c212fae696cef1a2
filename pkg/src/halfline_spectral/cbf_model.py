"""Complete Bernstein functions: the model contract and a catalog.

A model is a Laplace exponent ``psi`` of a subordinator, assumed to be a
complete Bernstein function (CBF).  Besides values and the first two
derivatives on (0, inf), every catalog entry carries

* its holomorphic extension to the slit plane C minus (-inf, 0],
* the upper boundary values ``psi(-s + i0)`` on the cut,
* an accurate divided difference ``(psi(a) - psi(b)) / (a - b)``.

The divided difference is what the Wiener-Hopf code uses to evaluate the
regularised exponent without cancellation near ``a = b``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ModelError",
    "ModelSpec",
    "LaplaceExponent",
    "build_model",
    "CheckResult",
    "ValidationReport",
    "validate_cbf",
]


class ModelError(ValueError):
    """Invalid model parameters or an unsupported composition."""


# ---------------------------------------------------------------------------
# model specs


_KINDS = (
    "stable",
    "relativistic",
    "stable_plus_drift",
    "gamma",
    "log_log",
    "cp_exponential",
    "rational",
    "sum",
    "scaled",
)

_ALIASES = {
    "stable-drift": "stable_plus_drift",
    "stable-plus-drift": "stable_plus_drift",
    "log-log": "log_log",
    "loglog": "log_log",
    "cp-exp": "cp_exponential",
    "cp_exp": "cp_exponential",
    "cp-exponential": "cp_exponential",
}


@dataclass(frozen=True)
class ModelSpec:
    """Serializable description of a catalog model.

    JSON field names: ``kind`` plus ``alpha`` (stable, stable_plus_drift),
    ``m`` (relativistic), ``beta`` (stable_plus_drift), ``terms`` (rational:
    list of ``[c, d]`` pairs for ``sum c*x/(x+d)``; sum: list of specs),
    ``C`` and ``inner`` (scaled).
    """

    kind: str
    alpha: Optional[float] = None
    m: Optional[float] = None
    beta: Optional[float] = None
    terms: tuple = ()
    C: Optional[float] = None
    inner: Optional["ModelSpec"] = None

    # constructors -------------------------------------------------------
    @staticmethod
    def stable(alpha: float) -> "ModelSpec":
        return ModelSpec("stable", alpha=float(alpha))

    @staticmethod
    def brownian() -> "ModelSpec":
        return ModelSpec("stable", alpha=2.0)

    @staticmethod
    def relativistic(m: float) -> "ModelSpec":
        return ModelSpec("relativistic", m=float(m))

    @staticmethod
    def stable_plus_drift(alpha: float, beta: float) -> "ModelSpec":
        return ModelSpec("stable_plus_drift", alpha=float(alpha), beta=float(beta))

    @staticmethod
    def gamma() -> "ModelSpec":
        return ModelSpec("gamma")

    @staticmethod
    def log_log() -> "ModelSpec":
        return ModelSpec("log_log")

    @staticmethod
    def cp_exponential() -> "ModelSpec":
        return ModelSpec("cp_exponential")

    @staticmethod
    def rational(pairs) -> "ModelSpec":
        return ModelSpec("rational", terms=tuple((float(c), float(d)) for c, d in pairs))

    @staticmethod
    def sum_of(*specs: "ModelSpec") -> "ModelSpec":
        return ModelSpec("sum", terms=tuple(specs))

    @staticmethod
    def scaled(C: float, inner: "ModelSpec") -> "ModelSpec":
        return ModelSpec("scaled", C=float(C), inner=inner)

    # serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind in ("stable", "stable_plus_drift"):
            d["alpha"] = self.alpha
        if self.kind == "stable_plus_drift":
            d["beta"] = self.beta
        if self.kind == "relativistic":
            d["m"] = self.m
        if self.kind == "rational":
            d["terms"] = [[c, dd] for c, dd in self.terms]
        if self.kind == "sum":
            d["terms"] = [t.to_dict() for t in self.terms]
        if self.kind == "scaled":
            d["C"] = self.C
            d["inner"] = self.inner.to_dict()
        return d

    @staticmethod
    def from_dict(d: dict) -> "ModelSpec":
        if not isinstance(d, dict) or "kind" not in d:
            raise ModelError(f"model spec must be an object with a 'kind' field, got {d!r}")
        kind = _ALIASES.get(d["kind"], d["kind"])
        if kind == "brownian":
            return ModelSpec.brownian()
        if kind not in _KINDS:
            raise ModelError(f"unknown model kind {d['kind']!r}; expected one of {_KINDS}")
        allowed = {
            "stable": {"alpha"},
            "relativistic": {"m"},
            "stable_plus_drift": {"alpha", "beta"},
            "gamma": set(),
            "log_log": set(),
            "cp_exponential": set(),
            "rational": {"terms"},
            "sum": {"terms"},
            "scaled": {"C", "inner"},
        }[kind]
        extra = set(d) - allowed - {"kind"}
        if extra:
            raise ModelError(f"unexpected fields {sorted(extra)} for kind {kind!r}")
        missing = allowed - set(d)
        if missing:
            raise ModelError(f"missing fields {sorted(missing)} for kind {kind!r}")
        if kind == "rational":
            try:
                terms = tuple((float(c), float(dd)) for c, dd in d["terms"])
            except (TypeError, ValueError):
                raise ModelError(f"rational terms must be [c, d] pairs, got {d['terms']!r}")
            return ModelSpec("rational", terms=terms)
        if kind == "sum":
            return ModelSpec("sum", terms=tuple(ModelSpec.from_dict(t) for t in d["terms"]))
        if kind == "scaled":
            return ModelSpec("scaled", C=float(d["C"]), inner=ModelSpec.from_dict(d["inner"]))
        return ModelSpec(kind, **{k: float(d[k]) for k in allowed})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ModelSpec":
        return ModelSpec.from_dict(json.loads(text))

    @staticmethod
    def parse(text: str) -> "ModelSpec":
        """Parse ``kind[:p1[:p2]]`` shorthand or a JSON object.

        Examples: ``stable:1.5``, ``brownian``, ``relativistic:1``,
        ``stable-drift:1:0.5``, ``gamma``, ``log-log``, ``cp-exp``,
        ``rational:5,1;1,5``.
        """
        text = text.strip()
        if text.startswith("{"):
            return ModelSpec.from_json(text)
        head, _, rest = text.partition(":")
        kind = _ALIASES.get(head, head)
        args = rest.split(":") if rest else []
        try:
            if kind == "brownian" and not args:
                return ModelSpec.brownian()
            if kind == "stable" and len(args) == 1:
                return ModelSpec.stable(float(args[0]))
            if kind == "relativistic" and len(args) == 1:
                return ModelSpec.relativistic(float(args[0]))
            if kind == "stable_plus_drift" and len(args) == 2:
                return ModelSpec.stable_plus_drift(float(args[0]), float(args[1]))
            if kind in ("gamma", "log_log", "cp_exponential") and not args:
                return ModelSpec(kind)
            if kind == "rational" and len(args) == 1:
                pairs = [p.split(",") for p in args[0].split(";") if p]
                return ModelSpec.rational([(float(c), float(d)) for c, d in pairs])
        except ValueError as exc:
            raise ModelError(f"cannot parse model {text!r}: {exc}") from None
        raise ModelError(f"cannot parse model {text!r}")

    def label(self) -> str:
        if self.kind == "stable":
            return "brownian" if self.alpha == 2.0 else f"stable:{self.alpha!r}"
        if self.kind == "relativistic":
            return f"relativistic:{self.m!r}"
        if self.kind == "stable_plus_drift":
            return f"stable-drift:{self.alpha!r}:{self.beta!r}"
        if self.kind in ("gamma", "log_log", "cp_exponential"):
            return self.kind
        return self.to_json()


# ---------------------------------------------------------------------------
# model contract


@dataclass(frozen=True, eq=False)
class LaplaceExponent:
    """A CBF together with the closed forms the spectral code needs.

    All callables are vectorized.  ``eval``, ``deriv1`` and ``deriv2`` also
    accept complex arguments off the cut (-inf, 0].  ``boundary_upper(s)``
    returns ``psi(-s + i0)`` for ``s > 0``; it is ``None`` for user models
    that do not provide it.  ``breakpoints`` are the points ``s > 0`` where
    the boundary function is not analytic (branch points, poles).
    """

    name: str
    eval: Callable
    deriv1: Callable
    deriv2: Callable
    eval_complex: Callable
    boundary_upper: Optional[Callable]
    is_unbounded: bool
    psi0: float
    ddiff: Callable
    breakpoints: tuple = ()
    rv_order: Optional[float] = None
    self_similar: bool = False
    spec: Optional[ModelSpec] = field(default=None, repr=False)

    def __call__(self, xi):
        return self.eval(xi)


def _f(x):
    return np.asarray(x, dtype=float)


def _log1p_ratio(d):
    """log1p(d)/d with the value 1 at d = 0."""
    d = np.asarray(d, dtype=float)
    safe = np.where(d == 0.0, 1.0, d)
    return np.where(d == 0.0, 1.0, np.log1p(safe) / safe)


def generic_ddiff(f: Callable, d1: Callable, rel: float = 1e-7) -> Callable:
    """Divided difference from values, with the derivative at near-ties."""

    def dd(a, b):
        a, b = np.broadcast_arrays(_f(a), _f(b))
        diff = a - b
        close = np.abs(diff) <= rel * np.maximum(np.abs(a), np.abs(b))
        safe = np.where(close, 1.0, diff)
        return np.where(close, d1(0.5 * (a + b)), (f(a) - f(b)) / safe)

    return dd


def _complex_minus(s):
    # -s + i0 with a positive signed zero, so principal branches pick the upper side
    s = _f(s)
    return (-s) + 0j


# catalog entries ------------------------------------------------------------


def _stable(alpha: float, spec) -> LaplaceExponent:
    if not (0.0 < alpha <= 2.0) or not math.isfinite(alpha):
        raise ModelError(f"stable model needs alpha in (0, 2], got {alpha!r}")
    p = alpha / 2.0
    if p == 1.0:
        return LaplaceExponent(
            name="brownian",
            eval=lambda x: np.asarray(x) * 1.0,
            deriv1=lambda x: np.ones_like(np.asarray(x) * 1.0),
            deriv2=lambda x: np.zeros_like(np.asarray(x) * 1.0),
            eval_complex=lambda z: np.asarray(z, dtype=complex),
            boundary_upper=lambda s: -_f(s) + 0j,
            is_unbounded=True,
            psi0=0.0,
            ddiff=lambda a, b: np.ones(np.broadcast(_f(a), _f(b)).shape),
            breakpoints=(),
            rv_order=1.0,
            self_similar=True,
            spec=spec,
        )

    def ev(x):
        return np.power(x, p)

    def d1(x):
        return p * np.power(x, p - 1.0)

    def d2(x):
        return p * (p - 1.0) * np.power(x, p - 2.0)

    def evc(z):
        return np.power(np.asarray(z, dtype=complex), p)

    phase = complex(math.cos(math.pi * p), math.sin(math.pi * p))

    def bnd(s):
        return np.power(_f(s), p) * phase

    def dd(a, b):
        a, b = np.broadcast_arrays(_f(a), _f(b))
        hi = np.maximum(a, b)
        lo = np.minimum(a, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            lr = np.log(lo / hi)
            same = lr == 0.0
            ratio = np.where(same, p, np.expm1(p * lr) / np.where(same, 1.0, np.expm1(lr)))
            return np.power(hi, p - 1.0) * ratio

    return LaplaceExponent(
        name=f"stable(alpha={alpha!r})",
        eval=ev,
        deriv1=d1,
        deriv2=d2,
        eval_complex=evc,
        boundary_upper=bnd,
        is_unbounded=True,
        psi0=0.0,
        ddiff=dd,
        breakpoints=(),
        rv_order=p,
        self_similar=True,
        spec=spec,
    )


def _relativistic(m: float, spec) -> LaplaceExponent:
    if not (m > 0.0) or not math.isfinite(m):
        raise ModelError(f"relativistic model needs m > 0, got {m!r}")
    m2 = m * m

    # sqrt(m^2 + x) - m written without cancellation; principal sqrt puts the cut on (-inf, -m^2]
    def ev(x):
        return x / (np.sqrt(m2 + x) + m)

    def d1(x):
        return 0.5 / np.sqrt(m2 + x)

    def d2(x):
        return -0.25 / (m2 + x) ** 1.5

    def bnd(s):
        s = _f(s)
        below = s <= m2
        r = np.sqrt(np.abs(m2 - s))
        return np.where(below, -s / (r + m) + 0j, 1j * r - m)

    def dd(a, b):
        return 1.0 / (np.sqrt(m2 + _f(a)) + np.sqrt(m2 + _f(b)))

    return LaplaceExponent(
        name=f"relativistic(m={m!r})",
        eval=ev,
        deriv1=d1,
        deriv2=d2,
        eval_complex=lambda z: ev(np.asarray(z, dtype=complex)),
        boundary_upper=bnd,
        is_unbounded=True,
        psi0=0.0,
        ddiff=dd,
        breakpoints=(m2,),
        rv_order=0.5,
        spec=spec,
    )


def _clog1p(z):
    # numpy's complex log1p loses ~3 digits near 0
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    big = np.abs(z) > 1e100
    with np.errstate(over="ignore", invalid="ignore"):
        re = np.where(big, np.log(np.abs(1.0 + z)), 0.5 * np.log1p(np.where(big, 0.0, x * (2.0 + x) + y * y)))
    return re + 1j * np.arctan2(y, 1.0 + x)


def _gamma_boundary(s):
    s = _f(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        below = np.log1p(-np.minimum(s, 1.0)) + 0j
        above = np.log(np.abs(s - 1.0)) + 1j * math.pi
    return np.where(s < 1.0, below, above)


def _gamma(spec) -> LaplaceExponent:
    def dd(a, b):
        a, b = np.broadcast_arrays(_f(a), _f(b))
        return _log1p_ratio((a - b) / (1.0 + b)) / (1.0 + b)

    return LaplaceExponent(
        name="gamma",
        eval=lambda x: np.log1p(x),
        deriv1=lambda x: 1.0 / (1.0 + x),
        deriv2=lambda x: -1.0 / (1.0 + x) ** 2,
        eval_complex=_clog1p,
        boundary_upper=_gamma_boundary,
        is_unbounded=True,
        psi0=0.0,
        ddiff=dd,
        breakpoints=(1.0,),
        rv_order=0.0,
        spec=spec,
    )


def _log_log(spec) -> LaplaceExponent:
    def d1(x):
        return 1.0 / ((1.0 + np.log1p(x)) * (1.0 + x))

    def d2(x):
        L = np.log1p(x)
        return -(2.0 + L) / ((1.0 + L) ** 2 * (1.0 + x) ** 2)

    def bnd(s):
        w = _gamma_boundary(s)
        v = 1.0 + w
        # real negative 1 + w sits on the cut of the outer log; take the upper side
        v = np.where(v.imag == 0.0, v.real + 0j, v)
        return np.log(v)

    def dd(a, b):
        a, b = np.broadcast_arrays(_f(a), _f(b))
        d1_ = (a - b) / (1.0 + b)
        D1 = np.log1p(d1_)
        Lb = 1.0 + np.log1p(b)
        d2_ = D1 / Lb
        return _log1p_ratio(d2_) * _log1p_ratio(d1_) / ((1.0 + b) * Lb)

    return LaplaceExponent(
        name="log_log",
        eval=lambda x: np.log1p(np.log1p(x)),
        deriv1=d1,
        deriv2=d2,
        eval_complex=lambda z: _clog1p(_clog1p(z)),
        boundary_upper=bnd,
        is_unbounded=True,
        psi0=0.0,
        ddiff=dd,
        breakpoints=(1.0 - math.exp(-1.0), 1.0),
        rv_order=0.0,
        spec=spec,
    )


def _rational(pairs, spec, name=None) -> LaplaceExponent:
    if not pairs:
        raise ModelError("rational model needs at least one (c, d) term")
    for c, d in pairs:
        if not (c > 0.0 and d > 0.0) or not (math.isfinite(c) and math.isfinite(d)):
            raise ModelError(f"rational terms need c > 0 and d > 0, got ({c!r}, {d!r})")
    cs = [float(c) for c, _ in pairs]
    ds = [float(d) for _, d in pairs]

    def ev(x):
        return sum(c * x / (x + d) for c, d in zip(cs, ds))

    def d1(x):
        return sum(c * d / (x + d) ** 2 for c, d in zip(cs, ds))

    def d2(x):
        return sum(-2.0 * c * d / (x + d) ** 3 for c, d in zip(cs, ds))

    def bnd(s):
        s = _f(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            return sum(c * (-s) / (d - s) for c, d in zip(cs, ds)) + 0j

    def dd(a, b):
        a, b = _f(a), _f(b)
        return sum(c * d / ((a + d) * (b + d)) for c, d in zip(cs, ds))

    return LaplaceExponent(
        name=name or f"rational({list(zip(cs, ds))})",
        eval=ev,
        deriv1=d1,
        deriv2=d2,
        eval_complex=lambda z: ev(np.asarray(z, dtype=complex)),
        boundary_upper=bnd,
        is_unbounded=False,
        psi0=0.0,
        ddiff=dd,
        breakpoints=tuple(sorted(set(ds))),
        rv_order=None,
        spec=spec,
    )


def _drift(beta: float) -> LaplaceExponent:
    return LaplaceExponent(
        name=f"drift({beta!r})",
        eval=lambda x: beta * np.asarray(x),
        deriv1=lambda x: beta * np.ones_like(np.asarray(x) * 1.0),
        deriv2=lambda x: np.zeros_like(np.asarray(x) * 1.0),
        eval_complex=lambda z: beta * np.asarray(z, dtype=complex),
        boundary_upper=lambda s: -beta * _f(s) + 0j,
        is_unbounded=beta > 0,
        psi0=0.0,
        ddiff=lambda a, b: beta * np.ones(np.broadcast(_f(a), _f(b)).shape),
        rv_order=1.0 if beta > 0 else None,
    )


def _sum(parts, spec, name) -> LaplaceExponent:
    parts = list(parts)
    if not parts:
        raise ModelError("sum model needs at least one term")
    bnds = [p.boundary_upper for p in parts]
    unb = [p for p in parts if p.is_unbounded]
    if unb and all(p.rv_order is not None for p in unb):
        order = max(p.rv_order for p in unb)
    else:
        order = None

    def bnd(s):
        return sum(b(s) for b in bnds)

    return LaplaceExponent(
        name=name,
        eval=lambda x: sum(p.eval(x) for p in parts),
        deriv1=lambda x: sum(p.deriv1(x) for p in parts),
        deriv2=lambda x: sum(p.deriv2(x) for p in parts),
        eval_complex=lambda z: sum(p.eval_complex(z) for p in parts),
        boundary_upper=bnd if all(b is not None for b in bnds) else None,
        is_unbounded=bool(unb),
        psi0=float(sum(p.psi0 for p in parts)),
        ddiff=lambda a, b: sum(p.ddiff(a, b) for p in parts),
        breakpoints=tuple(sorted({bp for p in parts for bp in p.breakpoints})),
        rv_order=order,
        self_similar=False,
        spec=spec,
    )


def _scaled(C: float, inner: LaplaceExponent, spec) -> LaplaceExponent:
    if not (C > 0.0) or not math.isfinite(C):
        raise ModelError(f"scaling constant must be positive, got {C!r}")
    b = inner.boundary_upper
    return LaplaceExponent(
        name=f"{C!r}*{inner.name}",
        eval=lambda x: C * inner.eval(x),
        deriv1=lambda x: C * inner.deriv1(x),
        deriv2=lambda x: C * inner.deriv2(x),
        eval_complex=lambda z: C * inner.eval_complex(z),
        boundary_upper=(lambda s: C * b(s)) if b is not None else None,
        is_unbounded=inner.is_unbounded,
        psi0=C * inner.psi0,
        ddiff=lambda a, bb: C * inner.ddiff(a, bb),
        breakpoints=inner.breakpoints,
        rv_order=inner.rv_order,
        self_similar=inner.self_similar,
        spec=spec,
    )


def build_model(spec: ModelSpec) -> LaplaceExponent:
    """Assemble the closed forms for ``spec``."""
    if isinstance(spec, str):
        spec = ModelSpec.parse(spec)
    k = spec.kind
    if k == "stable":
        return _stable(float(spec.alpha), spec)
    if k == "relativistic":
        return _relativistic(float(spec.m), spec)
    if k == "gamma":
        return _gamma(spec)
    if k == "log_log":
        return _log_log(spec)
    if k == "cp_exponential":
        return _rational([(1.0, 1.0)], spec, name="cp_exponential")
    if k == "rational":
        return _rational(spec.terms, spec)
    if k == "stable_plus_drift":
        beta = float(spec.beta)
        if not (beta >= 0.0) or not math.isfinite(beta):
            raise ModelError(f"drift must be >= 0, got {beta!r}")
        st = _stable(float(spec.alpha), None)
        if beta == 0.0:
            return _sum([st], spec, f"stable(alpha={spec.alpha!r})+drift(0.0)")
        return _sum([st, _drift(beta)], spec, f"stable(alpha={spec.alpha!r})+drift({beta!r})")
    if k == "sum":
        return _sum([build_model(t) for t in spec.terms], spec, "+".join(
            build_model(t).name for t in spec.terms))
    if k == "scaled":
        if spec.inner is None:
            raise ModelError("scaled model needs an inner model")
        return _scaled(float(spec.C), build_model(spec.inner), spec)
    raise ModelError(f"unsupported model kind {k!r}")


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst_margin: float
    where: object = None


@dataclass(frozen=True)
class ValidationReport:
    model_name: str
    checks: tuple
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self):
        for c in self.checks:
            yield f"{c.name:<18s} {'pass' if c.passed else 'FAIL'}  worst margin {c.worst_margin:.3e}"


def _margin_check(name, margins, where, tol):
    margins = np.asarray(margins, dtype=float)
    bad = ~np.isfinite(margins)
    if bad.any():
        i = int(np.argmax(bad))
        return CheckResult(name, False, float("-inf"), where[i])
    i = int(np.argmin(margins))
    return CheckResult(name, bool(margins[i] >= -tol), float(margins[i]), where[i])


def validate_cbf(model: LaplaceExponent, grid=None, complex_samples=None,
                 tol: float = 1e-10) -> ValidationReport:
    """Check the standard CBF inequalities on sample points.

    (a) ``0 <= x psi'(x) <= psi(x)``, (b) ``0 <= -x psi''(x) <= 2 psi'(x)``
    on the real grid; (c) ``|psi(z)| <= psi(|z|)/sin(eps/2)``,
    (d) ``|z psi'(z)| <= psi(|z|)/sin(eps/2)**2`` and
    (e) ``|psi(z)| <= C (1 + |z|)`` with ``C = psi(1)/sin(eps/2)`` on the
    complex samples, where ``eps = pi - |arg z|``.  Margins are relative;
    a check passes when its worst margin is ``>= -tol``.
    """
    if grid is None:
        grid = np.logspace(-3, 3, 61)
    x = np.asarray(grid, dtype=float)
    if x.size == 0 or np.any(x <= 0):
        raise ValueError("validation grid must be nonempty and positive")
    if complex_samples is None:
        r = np.logspace(-3, 3, 13)
        ang = np.linspace(-0.95, 0.95, 9) * math.pi
        complex_samples = (r[:, None] * np.exp(1j * ang[None, :])).ravel()
    z = np.asarray(complex_samples, dtype=complex)
    if np.any((z.imag == 0) & (z.real <= 0)):
        raise ValueError("complex samples must avoid (-inf, 0]")

    f, f1, f2 = model.eval(x), model.deriv1(x), model.deriv2(x)
    checks = []
    ra = x * f1 / f
    checks.append(_margin_check("a: 0<=xf'<=f", np.minimum(ra, 1.0 - ra), x, tol))
    with np.errstate(divide="ignore", invalid="ignore"):
        rb = np.where(f1 > 0, -x * f2 / np.where(f1 > 0, f1, 1.0), -x * f2)
    checks.append(_margin_check("b: 0<=-xf''<=2f'", np.minimum(rb, 2.0 - rb), x, tol))

    eps = math.pi - np.abs(np.angle(z))
    s = np.sin(eps / 2.0)
    fz = model.eval_complex(z)
    fabs = model.eval(np.abs(z))
    checks.append(_margin_check("c: |f(z)| bound", 1.0 - np.abs(fz) * s / fabs, z, tol))
    dz = model.deriv1(z)
    # the constant is squared: s/|s+z| can reach 1/sin(eps/2) near the cut
    checks.append(_margin_check("d: |zf'(z)| bound", 1.0 - np.abs(z * dz) * s * s / fabs, z, tol))
    C = model.eval(1.0) / s
    checks.append(_margin_check("e: linear growth", 1.0 - np.abs(fz) / (C * (1.0 + np.abs(z))), z, tol))

    up = z[z.imag > 0]
    fu = model.eval_complex(up)
    checks.append(_margin_check("upper half-plane", fu.imag / np.abs(fu), up, tol))
    conj_err = np.abs(model.eval_complex(np.conj(z)) - np.conj(fz)) / np.abs(fz)
    checks.append(_margin_check("conjugation", 1e-12 - conj_err, z, tol))
    real_err = np.abs(model.eval_complex(x + 0j) - f) / f
    checks.append(_margin_check("real restriction", 1e-14 - real_err, x, tol))

    extras = {
        "x_dpsi_over_psi_at_max": float(ra[-1]),
        "grid": (float(x[0]), float(x[-1]), int(x.size)),
    }
    if model.boundary_upper is not None:
        b = model.boundary_upper(x)
        # compare against eval_complex just above the cut, away from breakpoints
        ok = np.ones_like(x, dtype=bool)
        for bp in model.breakpoints:
            ok &= np.abs(x - bp) > 1e-3 * bp
        e = 1e-9 * x
        with np.errstate(divide="ignore", invalid="ignore"):
            approx = model.eval_complex(-x + 1j * e)
            scale = np.maximum(np.abs(b), np.abs(model.deriv1(x + 0j)) * x)
            berr = np.where(ok, np.abs(approx - b) / scale, 0.0)
        checks.append(_margin_check("boundary values", 1e-6 - berr, x, tol))
    else:
        extras["boundary_values"] = "unavailable"
    return ValidationReport(model.name, tuple(checks), extras)
