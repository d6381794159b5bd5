"""Reference constants P_s(B_1), V_s(B_1) and their on-disk cache.

The stored P_s(B_1) is the continuum value: the closed form in the plane,
a one-dimensional lens quadrature in general dimension.  Building an entry
cross-checks it against the independent lens quadrature and a Monte Carlo
estimate; it also records the value of the rasterized unit ball at the
entry's cell size, whose excess over the continuum value is the staircase
bias of the grid at that resolution.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

from .functionals import (
    ball_perimeter,
    ball_perimeter_lens,
    ball_potential,
    fractional_perimeter,
    monte_carlo_ball_perimeter,
)
from .geometry import Ball, rasterize_ball
from .kernels import KernelParams

__all__ = [
    "BallReference",
    "CacheMismatch",
    "CrossCheckFailure",
    "analytic_reference",
    "build_reference",
    "build_reference_cache",
    "save_cache",
    "load_cache",
]

MC_TOLERANCE = 0.01


class CacheMismatch(ValueError):
    """Raised when a cache entry does not match the requested (n, s, h)."""


class CrossCheckFailure(RuntimeError):
    """Raised when independent estimates of P_s(B_1) disagree."""


@dataclass(frozen=True)
class BallReference:
    n: int
    s: float
    h: float | None
    R: float | None
    P_s_B1: float
    V_s_B1: float
    method: str
    error_estimate: float
    P_s_grid_ball: float | None = None

    @property
    def c_ns(self) -> float:
        """P_s(B_1)(n-s)/(nω_n), the weight that makes β vanish on balls."""
        return self.P_s_B1 * (self.n - self.s) / (self.n * _omega(self.n))

    @property
    def staircase_bias(self) -> float | None:
        if self.P_s_grid_ball is None:
            return None
        return self.P_s_grid_ball / self.P_s_B1 - 1.0

    def perimeter_ball(self, r: float) -> float:
        return self.P_s_B1 * r ** (self.n - self.s)

    def potential_ball(self, r: float) -> float:
        return self.V_s_B1 * r ** (self.n - self.s)

    def matches(self, n: int, s: float, h: float | None) -> bool:
        if self.n != n or self.s != s:
            return False
        return h is None or self.h is None or self.h == h

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BallReference":
        return cls(**d)


def _omega(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def analytic_reference(n: int, s: float, h: float | None = None) -> BallReference:
    """Continuum reference without any cross-checks (cheap)."""
    KernelParams(n, s)
    method = "closed-form" if n == 2 else "lens-quadrature"
    return BallReference(n, s, h, None, ball_perimeter(n, s), ball_potential(n, s), method, 1e-12)


def build_reference(n: int, s: float, h: float, mc_samples: int = 2_000_000, seed: int = 0,
                    grid_ball: bool = True) -> BallReference:
    """Reference entry for (n, s, h) with lens and Monte Carlo cross-checks.

    Raises ``CrossCheckFailure`` if the Monte Carlo estimate differs from the
    analytic value by more than 1 %, or by more than five standard errors.
    """
    base = analytic_reference(n, s, h)
    lens = ball_perimeter_lens(n, s)
    mc, se = monte_carlo_ball_perimeter(n, s, samples=mc_samples, seed=seed)
    dev = abs(mc - base.P_s_B1)
    if dev > MC_TOLERANCE * base.P_s_B1 or dev > 5 * se + 1e-12 * base.P_s_B1:
        raise CrossCheckFailure(f"Monte Carlo {mc:.6g} ± {se:.2g} vs analytic {base.P_s_B1:.10g}")
    if abs(lens - base.P_s_B1) > 1e-8 * base.P_s_B1:
        raise CrossCheckFailure(f"lens quadrature {lens:.12g} vs analytic {base.P_s_B1:.12g}")
    grid = None
    if grid_ball:
        grid = fractional_perimeter(rasterize_ball(Ball((0.0,) * n, 1.0), h), s)
    err = max(abs(lens - base.P_s_B1), se)
    return BallReference(n, s, h, None, base.P_s_B1, base.V_s_B1, base.method + "+lens+mc", err, grid)


def build_reference_cache(n: int, s_list, h: float, **kw) -> list[BallReference]:
    return [build_reference(n, float(s), h, **kw) for s in s_list]


def save_cache(path, refs) -> None:
    data = {"entries": [r.to_dict() for r in refs]}
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def load_cache(path, n: int, s: float, h: float | None) -> BallReference:
    """Entry for (n, s, h); refuses entries whose (n, s, h) differ."""
    data = json.loads(Path(path).read_text())
    entries = [BallReference.from_dict(d) for d in data["entries"]]
    for e in entries:
        if e.n == n and e.s == s and (h is None or e.h == h):
            return e
    have = ", ".join(f"(n={e.n}, s={e.s}, h={e.h})" for e in entries)
    raise CacheMismatch(f"no cache entry for (n={n}, s={s}, h={h}); available: {have}")
