"""Monte Carlo oracle: subordinate Brownian motion killed on leaving (0, inf).

The walk is ``x_{k+1} = x_k + sqrt(2 s_k) N_k`` with ``s_k`` a subordinator
increment over one time step (Brownian motion with variance 2t run at the
subordinator clock).  Killing is checked at grid times only, which biases
survival upwards; shrinking ``dt`` reduces the bias.

Replicas are processed in fixed-size chunks; chunk ``i`` draws from its own
Philox stream spawned from ``SeedSequence(seed)``, so results do not depend
on the number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .cbf_model import LaplaceExponent, ModelError, ModelSpec, build_model
from .config import default_workers

__all__ = [
    "McEstimate",
    "SubordinatorSampler",
    "make_sampler",
    "sample_increment",
    "simulate_killed",
    "simulate_batch",
    "mc_survival",
    "mc_eigen_check",
    "mc_density",
    "write_dump",
    "read_dump",
]

CHUNK = 10_000
_MAX_REJECT_ROUNDS = 10_000


@dataclass
class SubordinatorSampler:
    """Increment sampler for one catalog subordinator.

    ``parts`` are callables ``(dt, rng, size) -> array`` whose independent
    draws add up to an increment over ``dt``.  ``retries`` counts rejected
    proposals (relativistic sampler only).
    """

    label: str
    parts: List[Callable]
    mean_rate: float  # psi'(0+), may be inf
    retries: int = field(default=0)

    @property
    def continuous(self) -> bool:
        """True when the subordinator is a pure drift (X is Brownian motion)."""
        return all(getattr(p, "is_drift", False) for p in self.parts)

    def __call__(self, dt: float, rng: np.random.Generator, size=None) -> np.ndarray:
        shape = () if size is None else size
        out = np.zeros(shape)
        for p in self.parts:
            out = out + p(dt, rng, shape)
        return out


def _drift_part(beta: float):
    def drift(dt, rng, size):
        return np.full(size, beta * dt)
    drift.is_drift = True
    return drift


def _stable_part(a: float):
    """``psi(xi) = xi^a``, 0 < a <= 1."""
    if a == 1.0:
        return _drift_part(1.0)
    if a == 0.5:
        # Levy law: E exp(-xi Z_t) = exp(-t sqrt(xi)) for Z_t = t^2 / (2 N^2)
        def half(dt, rng, size):
            n = rng.standard_normal(size)
            return dt * dt / (2.0 * n * n)
        return half

    def kanter(dt, rng, size):
        u = rng.uniform(0.0, math.pi, size)
        e = rng.standard_exponential(size)
        s = (np.sin(a * u) / np.sin(u) ** (1.0 / a)) * (np.sin((1.0 - a) * u) / e) ** ((1.0 - a) / a)
        return dt ** (1.0 / a) * s
    return kanter


def _relativistic_part(m: float, sampler_box: list, method: str):
    """``psi(xi) = sqrt(xi + m^2) - m``: 1/2-stable tilted by ``exp(-m^2 s)``."""
    half = _stable_part(0.5)

    if method == "wald":
        def wald(dt, rng, size):
            return rng.wald(dt / (2.0 * m), dt * dt / 2.0, size)
        return wald

    def reject(dt, rng, size):
        # acceptance probability exp(-m dt); split long steps so m*dt <= 1
        k = max(1, int(math.ceil(m * dt)))
        h = dt / k
        total = np.zeros(size)
        for _ in range(k):
            out = np.empty(size)
            flat = out.reshape(-1)
            todo = np.arange(flat.size)
            rounds = 0
            while todo.size:
                s = half(h, rng, todo.size)
                acc = rng.uniform(size=todo.size) < np.exp(-m * m * s)
                flat[todo[acc]] = s[acc]
                sampler_box[0].retries += int(np.count_nonzero(~acc))
                todo = todo[~acc]
                rounds += 1
                if rounds > _MAX_REJECT_ROUNDS:
                    raise RuntimeError("relativistic rejection sampler did not terminate")
            total = total + out
        return total
    return reject


def _compound_part(rate: float, d: float):
    """``rate * xi / (xi + d)``: Poisson(rate dt) jumps, each Exp with mean 1/d."""
    def cp(dt, rng, size):
        n = rng.poisson(rate * dt, size)
        out = np.zeros(np.shape(n))
        pos = n > 0
        out[pos] = rng.gamma(n[pos], 1.0 / d)
        return out
    return cp


def _parts(spec: ModelSpec, box: list, method: str, scale: float = 1.0):
    k = spec.kind

    def scaled(p):
        if scale == 1.0:
            return p
        q = lambda dt, rng, size, p=p: p(scale * dt, rng, size)  # noqa: E731
        q.is_drift = getattr(p, "is_drift", False)
        return q

    if k == "stable":
        a = float(spec.alpha) / 2.0
        return [scaled(_stable_part(a))], (math.inf if a < 1 else scale)
    if k == "gamma":
        return [scaled(lambda dt, rng, size: rng.gamma(dt, 1.0, size))], scale
    if k == "relativistic":
        m = float(spec.m)
        return [scaled(_relativistic_part(m, box, method))], scale / (2.0 * m)
    if k == "cp_exponential":
        return [scaled(_compound_part(1.0, 1.0))], scale
    if k == "rational":
        return [scaled(_compound_part(c, d)) for c, d in spec.terms], scale * sum(
            c / d for c, d in spec.terms)
    if k == "stable_plus_drift":
        a = float(spec.alpha) / 2.0
        beta = float(spec.beta)
        rate = math.inf if a < 1 else scale * (1 + beta)
        return [scaled(_stable_part(a)), scaled(_drift_part(beta))], rate
    if k == "sum":
        parts, rate = [], 0.0
        for t in spec.terms:
            p, r = _parts(t, box, method, scale)
            parts += p
            rate += r
        return parts, rate
    if k == "scaled":
        return _parts(spec.inner, box, method, scale * float(spec.C))
    raise ModelError(f"no subordinator sampler for model kind {k!r}")


def make_sampler(model, method: str = "rejection") -> SubordinatorSampler:
    """Sampler for a catalog model (``ModelSpec``, shorthand, or built model).

    ``method`` selects the relativistic sampler: ``"rejection"`` (tilted
    1/2-stable proposals) or ``"wald"`` (exact inverse Gaussian law).
    """
    if isinstance(model, LaplaceExponent):
        spec = model.spec
    elif isinstance(model, str):
        spec = ModelSpec.parse(model)
    else:
        spec = model
    if spec is None:
        raise ModelError("model has no spec; cannot build a sampler")
    if method not in ("rejection", "wald"):
        raise ValueError(f"unknown method {method!r}")
    box: list = [None]
    parts, rate = _parts(spec, box, method)
    s = SubordinatorSampler(spec.label(), parts, rate)
    box[0] = s
    return s


def sample_increment(sampler: SubordinatorSampler, dt: float, rng: np.random.Generator,
                     size=None):
    """Draw subordinator increments over ``dt`` (nonnegative)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    out = sampler(dt, rng, size)
    return out if size is not None else float(out)


# ---------------------------------------------------------------------------
# killed walk


def _steps(t: float, dt: float):
    if not (t > 0 and dt > 0 and dt <= t):
        raise ValueError("need 0 < dt <= t")
    n = int(math.ceil(t / dt - 1e-9))
    return n, t / n


def simulate_batch(sampler: SubordinatorSampler, x: float, t: float, dt: float, n: int,
                   rng: np.random.Generator, kill: str = "grid"):
    """Run ``n`` independent killed walks.

    Returns ``(position, alive, steps)``; ``steps`` is the step at which a
    walk was killed, or the total step count for survivors.  The step is
    ``t / ceil(t/dt)`` so the horizon is hit exactly.

    ``kill="grid"`` checks the sign at grid times only.  ``kill="bridge"``
    (pure-drift subordinators only, i.e. Brownian motion) also kills with the
    Brownian-bridge probability ``exp(-a b / s)`` of crossing 0 between
    positions ``a, b > 0`` over clock time ``s``; this is exact.
    """
    if not x > 0:
        raise ValueError("start must be positive")
    if kill not in ("grid", "bridge"):
        raise ValueError(f"unknown kill mode {kill!r}")
    if kill == "bridge" and not sampler.continuous:
        raise ValueError("bridge killing is exact only for Brownian motion (pure-drift clock)")
    bridge = kill == "bridge"
    nsteps, h = _steps(t, dt)
    pos = np.full(n, float(x))
    steps = np.full(n, nsteps, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    idx = np.arange(n)
    for k in range(1, nsteps + 1):
        s = sampler(h, rng, idx.size)
        a = pos[idx]
        b = a + np.sqrt(2.0 * s) * rng.standard_normal(idx.size)
        pos[idx] = b
        dead = b <= 0.0
        if bridge:
            u = rng.uniform(size=idx.size)
            with np.errstate(over="ignore", invalid="ignore"):
                dead |= u < np.exp(-np.maximum(a, 0.0) * np.maximum(b, 0.0) / s)
        if np.any(dead):
            gone = idx[dead]
            alive[gone] = False
            steps[gone] = k
            idx = idx[~dead]
            if idx.size == 0:
                break
    return pos, alive, steps


def simulate_killed(model, x: float, t: float, dt: float, rng: np.random.Generator,
                    kill: str = "grid") -> dict:
    """One killed walk: ``{"alive": bool, "position": float or None}``."""
    sampler = model if isinstance(model, SubordinatorSampler) else make_sampler(model)
    pos, alive, steps = simulate_batch(sampler, x, t, dt, 1, rng, kill)
    return {"alive": bool(alive[0]), "position": float(pos[0]) if alive[0] else None,
            "steps": int(steps[0])}


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    n: int
    dt: float
    seed: int

    def z(self, target: float) -> float:
        return (self.value - target) / self.stderr if self.stderr > 0 else (
            0.0 if self.value == target else math.inf)


def _run(model, x, t, dt, n, seed, workers, reduce: Callable, method="rejection", dump=None,
         kill="grid"):
    """Chunked simulation; ``reduce(pos, alive)`` -> per-replica values."""
    if n < 1:
        raise ValueError("n must be positive")
    sampler_proto = model if isinstance(model, SubordinatorSampler) else None
    nchunks = (n + CHUNK - 1) // CHUNK
    streams = np.random.SeedSequence(seed).spawn(nchunks)
    sizes = [min(CHUNK, n - i * CHUNK) for i in range(nchunks)]

    def one(i):
        # each chunk owns its sampler so retry counters never race
        s = sampler_proto if sampler_proto is not None else make_sampler(model, method)
        rng = np.random.Generator(np.random.Philox(streams[i]))
        pos, alive, steps = simulate_batch(s, x, t, dt, sizes[i], rng, kill)
        return reduce(pos, alive), (pos, alive, steps)

    workers = default_workers() if workers is None else int(workers)
    if workers > 1 and nchunks > 1 and sampler_proto is None:
        with ThreadPoolExecutor(workers) as ex:
            res = list(ex.map(one, range(nchunks)))
    else:
        res = [one(i) for i in range(nchunks)]
    vals = np.concatenate([r[0] for r in res])
    if dump is not None:
        write_dump(dump, np.concatenate([r[1][0] for r in res]),
                   np.concatenate([r[1][1] for r in res]),
                   np.concatenate([r[1][2] for r in res]))
    return vals


def _estimate(vals, n, dt, seed):
    v = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return McEstimate(v, se, int(n), float(dt), int(seed))


def mc_survival(model, x: float, t: float, n: int, dt: float, seed: int,
                workers: Optional[int] = None, method: str = "rejection",
                dump: Optional[str] = None, kill: str = "grid") -> McEstimate:
    """Fraction of walks alive at ``t``; deterministic given ``seed``."""
    if n < 1000:
        raise ValueError("n must be at least 1000")
    vals = _run(model, x, t, dt, n, seed, workers, lambda p, a: a.astype(float), method, dump,
                kill)
    return _estimate(vals, n, dt, seed)


def mc_eigen_check(model, lam: float, x: float, t: float, n: int, dt: float, seed: int,
                   eigenfunction=None, workers: Optional[int] = None,
                   method: str = "rejection", kill: str = "grid") -> McEstimate:
    """Estimate ``E_x[F_lam(X_t); t < tau]``.

    Compare with ``exp(-t psi(lam^2)) F_lam(x)``.
    """
    from .eigenfunction import Eigenfunction

    if n < 1000:
        raise ValueError("n must be at least 1000")
    if eigenfunction is None:
        m = model if isinstance(model, LaplaceExponent) else build_model(model)
        eigenfunction = Eigenfunction(m, lam)

    def red(pos, alive):
        out = np.zeros(pos.shape)
        if np.any(alive):
            out[alive] = eigenfunction.F(pos[alive])
        return out

    vals = _run(model, x, t, dt, n, seed, workers, red, method, kill=kill)
    return _estimate(vals, n, dt, seed)


def mc_density(model, x: float, t: float, y, n: int, dt: float, seed: int,
               bin_width: float = 0.05, method: str = "rejection", kill: str = "grid"):
    """Histogram estimate of the killed density at ``y`` (bins centred at ``y``).

    Returns a list of :class:`McEstimate`, one per ``y``.
    """
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    pos_alive = []

    def red(pos, alive):
        pos_alive.append(np.where(alive, pos, -np.inf))
        return np.zeros(pos.shape)

    _run(model, x, t, dt, n, seed, 1, red, method, kill=kill)
    p = np.concatenate(pos_alive)
    out = []
    for yc in ys:
        ind = ((p >= yc - bin_width / 2) & (p < yc + bin_width / 2)).astype(float) / bin_width
        out.append(_estimate(ind, n, dt, seed))
    return out


# ---------------------------------------------------------------------------
# dump

_DUMP = np.dtype([("position", "<f8"), ("alive", "<f8"), ("steps", "<f8")])


def write_dump(path, position, alive, steps):
    """Write per-replica triples as little-endian float64."""
    rec = np.empty(len(position), dtype=_DUMP)
    rec["position"] = position
    rec["alive"] = np.asarray(alive, dtype=float)
    rec["steps"] = steps
    rec.tofile(path)


def read_dump(path):
    rec = np.fromfile(path, dtype=_DUMP)
    return rec["position"], rec["alive"].astype(bool), rec["steps"].astype(np.int64)
