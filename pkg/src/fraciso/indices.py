"""Asymmetry and deficit indices: α, δ_s, ζ_s, β_s, A_s and the checks tying them.

All indices of one set are computed from a single :class:`Evaluation`, which
holds the shared P_s(E) and V_s(E) values; that is what makes
β_s² = δ_s + ζ_s hold to rounding.  Grid sets and star-shaped profiles are
both accepted; profiles are evaluated with the boundary-integral backends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, optimize

from .functionals import VsResult, fractional_perimeter, riesz_potential, vs_value, _compass_max
from .geometry import (
    Ball,
    GridSet,
    RadialProfile,
    angles,
    ball_overlap,
    barycenter,
    rasterize,
    scale,
    unit_ball_volume,
)
from .reference import BallReference, CacheMismatch, analytic_reference

__all__ = [
    "Evaluation",
    "evaluate",
    "IndexReport",
    "BetaValue",
    "AnnulusCheck",
    "fraenkel_asymmetry",
    "deficit",
    "zeta",
    "beta",
    "strong_asymmetry",
    "poincare_check",
    "annulus_bound",
    "concavity_constant",
    "main_theorem_check",
    "index_report",
    "CSV_FIELDS",
]

RADICAND_TOL = 1e-6
OVERLAP_SUBSAMPLE = 4
PROFILE_OVERLAP_NODES = 4096


# ---------------------------------------------------------------------------
# shared evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Evaluation:
    """P_s(E), V_s(E) and the equal-volume ball quantities, computed once."""

    E: object
    s: float
    ref: BallReference
    volume: float
    r: float
    P: float
    vs: VsResult
    P_ball: float
    V_ball: float

    @property
    def n(self) -> int:
        return self.E.n

    @property
    def delta(self) -> float:
        return (self.P - self.P_ball) / self.P_ball

    @property
    def zeta(self) -> float:
        return (self.V_ball - self.vs.value) / self.V_ball

    @property
    def beta2(self) -> float:
        """(P_s(E) - c_{n,s} V_s(E)) / P_s(B_r), computed directly (not as δ + ζ)."""
        return (self.P - self.ref.c_ns * self.vs.value) / self.P_ball


def _reference_for(E, s: float, ref: BallReference | None) -> BallReference:
    if ref is None:
        return analytic_reference(E.n, s, getattr(E, "h", None))
    if ref.n != E.n or ref.s != s:
        raise CacheMismatch(f"reference is for (n={ref.n}, s={ref.s}), set needs (n={E.n}, s={s})")
    return ref


def evaluate(E, s: float, ref: BallReference | None = None, vs: VsResult | None = None) -> Evaluation:
    if float(E.volume) <= 0:
        raise ValueError("indices of an empty set")
    ref = _reference_for(E, s, ref)
    vol = float(E.volume)
    r = (vol / unit_ball_volume(E.n)) ** (1.0 / E.n)
    P = fractional_perimeter(E, s)
    vs = vs if vs is not None else vs_value(E, s)
    return Evaluation(E, s, ref, vol, r, P, vs, ref.perimeter_ball(r), ref.potential_ball(r))


def _as_eval(E, s, ref) -> Evaluation:
    return E if isinstance(E, Evaluation) else evaluate(E, s, ref)


# ---------------------------------------------------------------------------
# overlaps with balls
# ---------------------------------------------------------------------------

def _profile_overlap_fn(P: RadialProfile, r: float):
    th = angles(PROFILE_OVERLAP_NODES)
    rho_e = 1.0 + P.evaluate(th)
    w = np.exp(1j * th)
    c = complex(*P.center)
    dth = 2 * np.pi / len(th)
    fine = None

    def overlap(y) -> float:
        nonlocal fine
        d = complex(*y) - c
        if abs(d) < r:
            b = np.real(np.conj(w) * d)
            rho_b = b + np.sqrt(b * b + r * r - abs(d) ** 2)
            return 0.5 * float(np.sum(np.minimum(rho_e, rho_b) ** 2)) * dth
        # the ball misses the profile center: fall back to a fine raster
        if fine is None:
            fine = rasterize(P, float(rho_e.min()) / 256)
        return ball_overlap(fine, Ball(tuple(y), r), OVERLAP_SUBSAMPLE)

    return overlap


def _symdiff_fn(E, r: float):
    vol = float(E.volume)
    bvol = unit_ball_volume(E.n) * r**E.n
    if isinstance(E, RadialProfile):
        ov = _profile_overlap_fn(E, r)
        return lambda y: (vol + bvol - 2.0 * ov(y)) / bvol
    return lambda y: (vol + bvol - 2.0 * ball_overlap(E, Ball(tuple(y), r), OVERLAP_SUBSAMPLE)) / bvol


def _grid_seeds(E: GridSet, extra=()) -> list:
    seeds = [barycenter(E)]
    mask, lo = E.to_mask(pad=1)
    depth = ndimage.distance_transform_edt(mask)
    seeds.append(E.origin + E.h * (np.array(np.unravel_index(np.argmax(depth), mask.shape)) + lo + 0.5))
    lab, k = ndimage.label(mask)
    if k > 1:
        sizes = ndimage.sum(mask, lab, index=np.arange(1, k + 1))
        for i in np.argsort(-sizes, kind="stable")[:4]:
            com = ndimage.center_of_mass(mask, lab, i + 1)
            seeds.append(E.origin + E.h * (np.array(com) + lo + 0.5))
    seeds.extend(np.asarray(p, float) for p in extra)
    return seeds


def _minimize(f, E, seeds) -> tuple[float, np.ndarray]:
    """Smallest value of f over local searches from ``seeds`` (ties: first seed)."""
    best = None
    for y0 in seeds:
        if isinstance(E, RadialProfile):
            res = optimize.minimize(f, np.asarray(y0, float), method="Nelder-Mead",
                                    options={"xatol": 1e-8, "fatol": 1e-13, "maxiter": 2000})
            val, y = float(res.fun), np.asarray(res.x)
        else:
            val, y = _compass_max(lambda z: -f(z), y0, E.h, E.h / 8, E.n)
            val = -val
        if best is None or val < best[0] - 1e-15:
            best = (val, np.asarray(y, float))
    return best


def _seeds(E, extra=()) -> list:
    if isinstance(E, RadialProfile):
        return [np.array(E.center, float), barycenter(E), *[np.asarray(p, float) for p in extra]]
    return _grid_seeds(E, extra)


# ---------------------------------------------------------------------------
# indices
# ---------------------------------------------------------------------------

def fraenkel_asymmetry(E, seeds=()) -> tuple[float, np.ndarray]:
    """α(E) = min_y |E Δ B_r(y)| / |B_r| and a minimizing center."""
    if float(E.volume) <= 0:
        raise ValueError("asymmetry of an empty set")
    r = (float(E.volume) / unit_ball_volume(E.n)) ** (1.0 / E.n)
    val, y = _minimize(_symdiff_fn(E, r), E, _seeds(E, seeds))
    return min(max(val, 0.0), 2.0), y


def deficit(E, s: float, ref: BallReference | None = None) -> float:
    """δ_s(E) = (P_s(E) - P_s(B_r)) / P_s(B_r)."""
    if isinstance(E, Evaluation):
        return E.delta
    if float(E.volume) <= 0:
        raise ValueError("deficit of an empty set")
    ref = _reference_for(E, s, ref)
    r = (float(E.volume) / unit_ball_volume(E.n)) ** (1.0 / E.n)
    Pb = ref.perimeter_ball(r)
    return (fractional_perimeter(E, s) - Pb) / Pb


def zeta(E, s: float, ref: BallReference | None = None) -> float:
    """ζ_s(E) = (V_s(B_r) - V_s(E)) / V_s(B_r)."""
    return _as_eval(E, s, ref).zeta


@dataclass(frozen=True)
class BetaValue:
    value: float
    radicand: float
    clamped: bool

    def __float__(self) -> float:
        return self.value


def beta(E, s: float, ref: BallReference | None = None, tol: float = RADICAND_TOL) -> BetaValue:
    """β_s(E); a radicand in [-10 tol, 0) is clamped to zero and flagged."""
    ev = _as_eval(E, s, ref)
    rad = ev.beta2
    if rad < -10 * tol:
        raise ArithmeticError(f"β radicand {rad:.3e} is negative beyond tolerance")
    if rad < 0:
        return BetaValue(0.0, rad, True)
    return BetaValue(math.sqrt(rad), rad, False)


def strong_asymmetry(E, s: float, ref: BallReference | None = None, seeds=(),
                     tol: float = RADICAND_TOL) -> tuple[float, np.ndarray]:
    """A_s(E) = min_y { |E Δ B_r(y)|/|B_r| + ((P_s(E) - c ∫_E |x-y|^{-s}) / P_s(B_r))^{1/2} }."""
    ev = _as_eval(E, s, ref)
    E = ev.E
    sd = _symdiff_fn(E, ev.r)
    c = ev.ref.c_ns
    worst = [0.0]

    def f(y):
        rad = (ev.P - c * riesz_potential(E, y, s)) / ev.P_ball
        worst[0] = min(worst[0], rad)
        return sd(y) + math.sqrt(max(rad, 0.0))

    val, y = _minimize(f, E, _seeds(E, (ev.vs.center, *seeds)))
    if worst[0] < -10 * tol:
        raise ArithmeticError(f"A_s radicand {worst[0]:.3e} is negative beyond tolerance")
    return val, y


def poincare_check(E, s: float, ref: BallReference | None = None, tol: float = 1e-8,
                   A: float | None = None) -> float:
    """(A_s + δ_s^{1/2}) / β_s."""
    ev = _as_eval(E, s, ref)
    b = beta(ev, s).value
    if A is None:
        A = strong_asymmetry(ev, s)[0]
    if b <= tol:
        if A > 1e3 * tol:
            raise ArithmeticError("β_s vanishes while A_s does not")
        raise ValueError("β_s is zero: ratio undefined")
    return (A + math.sqrt(max(ev.delta, 0.0))) / b


def main_theorem_check(E, s: float, ref: BallReference | None = None, tol: float = 1e-8,
                       A: float | None = None) -> float:
    """A_s² / δ_s."""
    ev = _as_eval(E, s, ref)
    d = ev.delta
    if d <= tol:
        raise ValueError(f"δ_s = {d:.3e} is not positive: ratio undefined")
    if A is None:
        A = strong_asymmetry(ev, s)[0]
    return A * A / d


def concavity_constant(n: int, s: float) -> float:
    """-¼ sup f'' for f(t) = (1+t)^{(n-s)/n} on (-1, 1)."""
    return s * (n - s) / (4 * n * n) * 2 ** (-(n + s) / n)


@dataclass(frozen=True)
class AnnulusCheck:
    beta2: float
    delta: float
    a: float
    annulus_term: float
    quadratic_term: float
    holds: bool


def _normalized(E):
    lam = (unit_ball_volume(E.n) / float(E.volume)) ** (1.0 / E.n)
    if isinstance(E, RadialProfile):
        c = np.array(E.center) * lam
        return RadialProfile((1.0 + E.samples) * lam - 1.0, tuple(c))
    return scale(E, lam)


def annulus_bound(E, s: float, ref: BallReference | None = None, rtol: float = 0.01) -> AnnulusCheck:
    """β_s² ≥ δ_s + 2 - (1 + a/ω_n)^{(n-s)/n} - (1 - a/ω_n)^{(n-s)/n} for the
    volume-normalized set, with a = |E ∖ B_1(y)| about its V_s-center y.

    The concavity consequence β_s² ≥ δ_s + 8 α_{n,s} a²/ω_n² is reported too.
    """
    F = _normalized(E)
    ev = evaluate(F, s, ref)
    w = unit_ball_volume(F.n)
    B = Ball(tuple(ev.vs.center), 1.0)
    if isinstance(F, RadialProfile):
        inside = _profile_overlap_fn(F, 1.0)(ev.vs.center)
    else:
        inside = ball_overlap(F, B, 8)
    a = max(ev.volume - inside, 0.0)
    t = min(a / w, 1.0)
    p = (F.n - s) / F.n
    ann = 2.0 - (1 + t) ** p - (1 - t) ** p
    quad = 8 * concavity_constant(F.n, s) * t * t
    rhs = ev.delta + ann
    holds = ev.beta2 >= rhs - rtol * abs(rhs) - 1e-12
    return AnnulusCheck(ev.beta2, ev.delta, a, ann, quad, bool(holds))


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

CSV_FIELDS = [
    "set_id", "n", "s", "h", "alpha", "delta_s", "zeta_s", "beta_s", "A_s",
    "alpha2_over_delta", "A2_over_delta", "poincare_ratio", "zeta_over_alpha2",
    "alpha_center", "A_center", "vs_center", "r", "flags",
]


@dataclass(frozen=True)
class IndexReport:
    set_id: str
    n: int
    s: float
    h: float | None
    alpha: float
    delta_s: float
    zeta_s: float
    beta_s: float
    beta2: float
    A_s: float
    alpha_center: np.ndarray
    A_center: np.ndarray
    vs_center: np.ndarray
    r: float
    P_s: float
    V_s: float
    flags: tuple = field(default_factory=tuple)

    def identity_residual(self) -> float:
        """|β² - δ - ζ| relative to the largest of the three magnitudes."""
        scale_ = max(abs(self.beta2), abs(self.delta_s), abs(self.zeta_s), 1e-300)
        return abs(self.beta2 - self.delta_s - self.zeta_s) / scale_

    def ratios(self) -> dict:
        def div(a, b):
            return a / b if b > 1e-12 else math.nan

        return {
            "alpha2_over_delta": div(self.alpha**2, self.delta_s),
            "A2_over_delta": div(self.A_s**2, self.delta_s),
            "poincare_ratio": div(self.A_s + math.sqrt(max(self.delta_s, 0.0)), self.beta_s),
            "zeta_over_alpha2": div(self.zeta_s, self.alpha**2),
        }

    def csv_row(self) -> dict:
        fmt = lambda v: ";".join(f"{x:.10g}" for x in np.atleast_1d(v))
        row = {
            "set_id": self.set_id, "n": self.n, "s": f"{self.s:g}",
            "h": "" if self.h is None else f"{self.h:.10g}",
            "alpha": f"{self.alpha:.10g}", "delta_s": f"{self.delta_s:.10g}",
            "zeta_s": f"{self.zeta_s:.10g}", "beta_s": f"{self.beta_s:.10g}", "A_s": f"{self.A_s:.10g}",
        }
        row.update({k: f"{v:.10g}" for k, v in self.ratios().items()})
        row.update({
            "alpha_center": fmt(self.alpha_center), "A_center": fmt(self.A_center),
            "vs_center": fmt(self.vs_center), "r": f"{self.r:.10g}", "flags": "|".join(self.flags),
        })
        return row


def index_report(E, s: float, set_id: str = "set", ref: BallReference | None = None) -> IndexReport:
    ev = evaluate(E, s, ref)
    flags = []
    if ev.vs.nonunique:
        flags.append("vs_center_nonunique")
    try:
        b = beta(ev, s)
        bval = b.value
        if b.clamped:
            flags.append("beta_radicand_clamped")
    except ArithmeticError:
        # a report must still be written; the caller decides how to fail
        bval = math.nan
        flags.append("beta_radicand_negative")
    alpha, ya = fraenkel_asymmetry(E, seeds=(ev.vs.center,))
    try:
        A, yA = strong_asymmetry(ev, s, seeds=(ya,))
    except ArithmeticError:
        A, yA = math.nan, np.full(E.n, math.nan)
        flags.append("A_radicand_negative")
    return IndexReport(
        set_id, E.n, s, getattr(E, "h", None), alpha, ev.delta, ev.zeta, bval, ev.beta2, A,
        ya, yA, np.asarray(ev.vs.center), ev.r, ev.P, ev.vs.value, tuple(flags),
    )
