"""Library-wide numerical settings."""
from __future__ import annotations

import os
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    """Absolute-plus-relative tolerances and quadrature budgets.

    A quantity ``v`` with error estimate ``e`` is accepted when
    ``e <= abs_tol + rel_tol * |v|``.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    de_max_level: int = 12
    de_max_nodes: int = 4000
    # relative distance to lambda^2 below which psi_lambda uses its limit value
    removable_rel: float = 1e-7
    panel_nodes: int = 20
    max_panels: int = 20000

    def accept(self, value, err) -> bool:
        return err <= self.abs_tol + self.rel_tol * abs(value)

    def with_(self, **kw) -> "Tolerances":
        return replace(self, **kw)


DEFAULT = Tolerances()

THREADS_ENV = "HALFLINE_SPECTRAL_THREADS"


def default_workers() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        return n
    return 1
