"""Families of sets whose Cheeger gap stays bounded while β_s² blows up.

Two constructions:

* oscillating planar profiles u = ε sin(2jθ), whose s-perimeter grows like
  j^s while every member contains B_{1-ε};
* fractal-type unions of scaled copies of a seed T_0, whose s-perimeter
  stays finite for s < σ and diverges for s ≥ σ as generations are added.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cheeger import ball_cheeger, cheeger_heuristic, cheeger_profile_upper, cheeger_ratio
from .functionals import fractional_perimeter, interaction
from .geometry import GridSet, RadialProfile, rasterize, unit_ball_volume
from .indices import evaluate
from .reference import BallReference, analytic_reference

__all__ = [
    "UnderResolved",
    "OscillatingFamily",
    "oscillating_set",
    "GrowthRow",
    "oscillating_growth_study",
    "interval_pair_bound",
    "FailureRow",
    "cheeger_vs_beta_failure",
    "FractalFamily",
    "Placement",
    "fractal_layout",
    "fractal_build",
    "fractal_witness",
    "fractal_shells_clear",
    "fractal_volume_series",
    "fractal_missing_volume",
    "fractal_series_bounds",
    "fractal_series_limit",
    "FractalRow",
    "fractal_failure_demo",
]

MAX_J = 32
MAX_GENERATIONS = 3
OSC_NODES_PER_J = 64


class UnderResolved(ValueError):
    """The requested resolution cannot represent the construction."""


# ---------------------------------------------------------------------------
# oscillating profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OscillatingFamily:
    epsilon: float
    j: int
    M: int | None = None

    def __post_init__(self):
        if int(self.j) != self.j or self.j < 1:
            raise ValueError("frequency j must be a positive integer")
        if self.j > MAX_J:
            raise ValueError(f"j is capped at {MAX_J}")
        if not 0 < self.epsilon <= 0.2:
            raise ValueError("epsilon must lie in (0, 0.2]")
        M = self.nodes
        if M < OSC_NODES_PER_J * self.j or M % 2:
            raise ValueError(f"need an even node count >= {OSC_NODES_PER_J * self.j}")

    @property
    def nodes(self) -> int:
        return OSC_NODES_PER_J * self.j if self.M is None else int(self.M)

    @property
    def volume(self) -> float:
        """Continuum area π(1 + ε²/2)."""
        return math.pi * (1 + self.epsilon**2 / 2)

    @property
    def inner_radius(self) -> float:
        return 1.0 - self.epsilon

    def profile(self) -> RadialProfile:
        return RadialProfile.from_function(lambda t: self.epsilon * np.sin(2 * self.j * t), self.nodes)


def oscillating_set(j: int, epsilon: float, M: int | None = None) -> RadialProfile:
    """Profile u(θ) = ε sin(2jθ) on max(M, 64j) nodes."""
    return OscillatingFamily(epsilon, j, M).profile()


@dataclass(frozen=True)
class GrowthRow:
    j: int
    P_s: float
    ratio: float  # P_s / j^s
    pair_bound: float
    P_s_grid: float | None = None


def _check_resolution(js, h):
    if h is not None and h > 1.0 / (32 * max(js)) * (1 + 1e-12):
        raise UnderResolved(f"h = {h:g} does not resolve j = {max(js)}; need h <= 1/{32 * max(js)}")


def oscillating_growth_study(epsilon: float, s: float, js, h: float | None = None) -> list[GrowthRow]:
    """P_s(Ω_j^ε) for each j, with P_s/j^s and the interval-pair lower bound.

    The profile value is the spectral boundary quadrature.  When ``h`` is
    given, each set is also rasterized at cell size h (h <= 1/(32 max j))
    and its exact grid value reported alongside.
    """
    js = sorted(int(j) for j in js)
    if not js:
        return []
    _check_resolution(js, h)
    rows = []
    for j in js:
        P = oscillating_set(j, epsilon)
        val = fractional_perimeter(P, s)
        grid = fractional_perimeter(rasterize(P, h), s) if h is not None else None
        rows.append(GrowthRow(j, val, val / j**s, interval_pair_bound(j, epsilon, s), grid))
    return rows


def _band_area(L: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Area of {(r, ρ) ∈ [0, L]² : |r - ρ| <= w}."""
    w = np.minimum(w, L)
    return L * L - (L - w) ** 2


def interval_pair_bound(j: int, epsilon: float, s: float, nodes: int = 24) -> float:
    """Σ_m ∬_{I_m × J_m} of a pointwise lower bound for the radial double integral.

    I_m and J_m are the arcs of length 1/(2j) centred at π/(4j) + mπ/j and
    3π/(4j) + mπ/j, where sin(2jθ) > 1/2 and < -1/2 respectively.  On such
    pairs the radial integrand is at least (1-ε)²/((1/4 + (1+ε)²)^{(2+s)/2} d^{2+s})
    on the band |r - ρ| <= d/2, d = |x - y|.  The result is a lower bound
    for P_s(Ω_j^ε) that grows like j^s.
    """
    if j < 1:
        raise ValueError("j must be positive")
    r = 1.0 / (4 * j)
    g, w = np.polynomial.legendre.leggauss(nodes)
    x = np.pi / (4 * j) + r * g
    y = 3 * np.pi / (4 * j) + r * g
    X, Y = np.meshgrid(x, y, indexing="ij")
    W = np.outer(w, w) * r * r
    d = 2 * np.abs(np.sin((X - Y) / 2))
    L = epsilon * (np.sin(2 * j * X) - np.sin(2 * j * Y))
    c0 = (1 - epsilon) ** 2 / (0.25 + (1 + epsilon) ** 2) ** ((2 + s) / 2)
    inner = c0 * _band_area(L, d / 2) / d ** (2 + s)
    # every m contributes the same amount by rotation invariance
    return float(j * np.sum(W * inner))


@dataclass(frozen=True)
class FailureRow:
    j: int
    h_value: float
    h_ball: float       # h(B) with |B| = |Ω_j^ε|
    h_upper_bound: float  # h(B_1)(1-ε)^{2-s-2m}
    gap: float
    beta2: float
    delta: float
    competitor: str

    @property
    def ratio(self) -> float:
        return self.gap / self.beta2


def cheeger_vs_beta_failure(epsilon: float, s: float, m: float, js,
                            ref: BallReference | None = None) -> list[FailureRow]:
    """Relative Cheeger gap and β_s² along the oscillating family.

    h(Ω_j^ε) is bounded above by the restricted competitor family of
    :func:`cheeger_profile_upper` (which contains B_{1-ε}); the gap column
    uses that value.
    """
    n = 2
    if not m > (n - s) / n:
        raise ValueError("m must exceed (n-s)/n")
    ref = ref or analytic_reference(n, s)
    hB1 = ball_cheeger(n, m, s, math.pi, ref)
    upper = hB1 * (1 - epsilon) ** (n - s - n * m)
    rows = []
    for j in sorted(int(j) for j in js):
        P = oscillating_set(j, epsilon)
        ch = cheeger_profile_upper(P, m, s, refine=1)
        hB = ball_cheeger(n, m, s, P.area(), ref)
        ev = evaluate(P, s, ref)
        rows.append(FailureRow(j, ch.value, hB, upper, (ch.value - hB) / hB, ev.beta2, ev.delta,
                               ch.extra.get("competitor", "")))
    return rows


# ---------------------------------------------------------------------------
# fractal-type unions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FractalFamily:
    """Seed square T_0 = [0, side]^n plus a·b^{k-1} copies at scale λ^{-k}.

    ``cells`` is the number of cells along a side of T_0 at generation 0;
    the build refines so that generation M copies keep ``cells``·λ^{-M}
    cells per side.  The witness shell S_0 sits ``gap`` box widths away
    from T_0 and is ``thickness`` box widths thick.
    """

    a: int = 1
    b: int = 3
    sigma: float = 2 - math.log2(3)
    M: int = 1
    n: int = 2
    side: float = 1.0
    cells: int = 16
    gap: float = 1.0
    thickness: float = 0.5

    def __post_init__(self):
        if self.a < 1 or self.b < 2 or int(self.a) != self.a or int(self.b) != self.b:
            raise ValueError("need integers a >= 1 and b >= 2")
        if not 0 < self.sigma < 1:
            raise ValueError("sigma must lie in (0, 1)")
        if not 0 <= self.M <= MAX_GENERATIONS:
            raise ValueError(f"generations are capped at {MAX_GENERATIONS}")
        if self.n < 2:
            raise ValueError("dimension must be at least 2")

    @property
    def lam(self) -> float:
        return self.b ** (1.0 / (self.n - self.sigma))

    @property
    def c0(self) -> float:
        return self.side / 2

    def copies(self, k: int) -> int:
        return self.a * self.b ** (k - 1) if k >= 1 else 1

    def cells_per_side(self, k: int) -> int:
        """Cells along a generation-k copy at the finest resolution used."""
        fine = self.fine_cells
        c = fine / self.lam**k
        if abs(c - round(c)) > 1e-9 * c:
            raise UnderResolved(f"generation {k} copy does not align with the grid ({c:g} cells)")
        return int(round(c))

    @property
    def fine_cells(self) -> int:
        c = self.cells * self.lam**self.M
        if abs(c - round(c)) > 1e-9 * c:
            raise UnderResolved("λ^M times the seed cell count must be an integer")
        return int(round(c))

    @property
    def h(self) -> float:
        return self.side / self.fine_cells


@dataclass(frozen=True)
class Placement:
    k: int
    i: int
    corner: tuple  # integer cell index of the lowest corner
    width: int     # cells per side


def _halo(width: int, fam: FractalFamily) -> int:
    return int(math.ceil((fam.gap + fam.thickness) * width))


def fractal_layout(fam: FractalFamily) -> list[Placement]:
    """Deterministic spiral placement of T_0 and all copies.

    A copy is accepted at the first ring position where its box dilated by
    its halo (gap plus shell) misses every placed box, and every placed
    dilated box misses it.  Shells of different copies may overlap each
    other; they never meet any copy.
    """
    n = fam.n
    w0 = fam.cells_per_side(0)
    placed = [Placement(0, 1, (0,) * n, w0)]
    for k in range(1, fam.M + 1):
        w = fam.cells_per_side(k)
        for i in range(1, fam.copies(k) + 1):
            c = _spiral_place(placed, w, fam)
            placed.append(Placement(k, i, c, w))
    return placed


def _conflict(c, w, halo, placed, fam) -> bool:
    lo = np.array(c)
    hi = lo + w
    for p in placed:
        plo = np.array(p.corner)
        phi = plo + p.width
        ph = _halo(p.width, fam)
        # my dilated box vs its box, and its dilated box vs my box
        if np.all(lo - halo < phi) and np.all(plo < hi + halo):
            return True
        if np.all(plo - ph < hi) and np.all(lo < phi + ph):
            return True
    return False


def _spiral_place(placed, w: int, fam: FractalFamily) -> tuple:
    n = fam.n
    halo = _halo(w, fam)
    step = w
    center = fam.cells_per_side(0) // 2
    ring = 1
    while ring < 10_000:
        cands = []
        for idx in np.ndindex(*(2 * ring + 1,) * n):
            off = np.array(idx) - ring
            if np.max(np.abs(off)) != ring:
                continue
            cands.append(off)
        # order on a ring: by angle (first two axes), then remaining axes
        cands.sort(key=lambda o: (math.atan2(o[1], o[0]) % (2 * math.pi), tuple(o[2:])))
        for off in cands:
            c = tuple(int(center - w // 2 + step * v) for v in off)
            if not _conflict(c, w, halo, placed, fam):
                return c
        ring += 1
    raise RuntimeError("placement failed")


def _boxes_to_set(boxes, h: float, n: int) -> GridSet:
    cells = []
    for lo, w in boxes:
        axes = [np.arange(lo[d], lo[d] + w) for d in range(n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        cells.append(np.stack([m.ravel() for m in mesh], axis=1))
    cells = np.concatenate(cells) if cells else np.zeros((0, n), np.int64)
    return GridSet(cells, h)


def fractal_build(fam: FractalFamily, M: int | None = None) -> GridSet:
    """Ω_M as a grid set at the family's finest cell size.

    ``M`` (<= fam.M) truncates the union to earlier generations on the
    same grid and layout.
    """
    M = fam.M if M is None else M
    if not 0 <= M <= fam.M:
        raise ValueError("M must lie between 0 and the family's generation count")
    layout = [p for p in fractal_layout(fam) if p.k <= M]
    E = _boxes_to_set([(p.corner, p.width) for p in layout], fam.h, fam.n)
    expected = sum(p.width**fam.n for p in layout)
    if len(E) != expected:
        raise RuntimeError("placement collision: copies overlap")
    return E


def fractal_witness(fam: FractalFamily, coarse: bool = True) -> tuple[GridSet, GridSet]:
    """(T_0, S_0): the seed square and its witness shell.

    With ``coarse`` both live on the seed grid (``fam.cells`` per side);
    interaction integrals over unions of cells do not depend on the grid.
    """
    w = fam.cells if coarse else fam.cells_per_side(0)
    h = fam.side / w
    g = int(round(fam.gap * w))
    t = int(round(fam.thickness * w))
    if t < 1:
        raise UnderResolved("witness shell thinner than one cell")
    n = fam.n
    T0 = _boxes_to_set([((0,) * n, w)], h, n)
    outer = _boxes_to_set([((-(g + t),) * n, w + 2 * (g + t))], h, n)
    inner = _boxes_to_set([((-g,) * n, w + 2 * g)], h, n)
    return T0, outer.difference(inner)


def fractal_shells_clear(fam: FractalFamily) -> bool:
    """True when every scaled witness shell S_k^i misses Ω_M cellwise."""
    E = fractal_build(fam)
    n = fam.n
    for p in fractal_layout(fam):
        w = p.width
        g = int(round(fam.gap * w))
        t = int(round(fam.thickness * w))
        lo = np.array(p.corner)
        outer = _boxes_to_set([(tuple(lo - g - t), w + 2 * (g + t))], fam.h, n)
        inner = _boxes_to_set([(tuple(lo - g), w + 2 * g)], fam.h, n)
        if outer.difference(inner).intersection_count(E):
            return False
    return True


def fractal_volume_series(a: int, b: int, sigma: float, M: int, n: int = 2, volume_T0: float = 1.0) -> float:
    """|T_0|(1 + (a/λⁿ) Σ_{k<M} (b/λⁿ)^k)."""
    lam = b ** (1.0 / (n - sigma))
    q = b / lam**n
    return volume_T0 * (1 + a / lam**n * math.fsum(q**k for k in range(M)))


def fractal_missing_volume(a: int, b: int, sigma: float, M: int, n: int = 2, volume_T0: float = 1.0) -> float:
    """|Ω_∞ ∖ Ω_M| = |T_0|(a/λⁿ) Σ_{k≥M} (b/λⁿ)^k (closed form)."""
    lam = b ** (1.0 / (n - sigma))
    q = b / lam**n
    return volume_T0 * a / lam**n * q**M / (1 - q)


def _series_factor(a, b, sigma, s, M, n):
    lam = b ** (1.0 / (n - sigma))
    q = b / lam ** (n - s)
    if abs(q - 1) < 1e-12:
        partial = float(M)
    else:
        partial = (1 - q**M) / (1 - q)
    return 1 + a / lam ** (n - s) * partial


def fractal_series_bounds(a: int, b: int, sigma: float, s: float, M: int, PsT0: float, LsT0S0: float,
                          n: int = 2) -> tuple[float, float]:
    """(upper, lower) closed-form bounds for P_s(Ω_M).

    Both are the seed quantity times 1 + (a/λ^{n-s}) Σ_{k<M} (b/λ^{n-s})^k.
    """
    if a < 1 or b < 2 or not 0 < sigma < 1 or not 0 < s < 1 or M < 0:
        raise ValueError("invalid parameters")
    if not PsT0 > LsT0S0 > 0:
        raise ValueError("need P_s(T_0) > L_s(T_0, S_0) > 0")
    f = _series_factor(a, b, sigma, s, M, n)
    return PsT0 * f, LsT0S0 * f


def fractal_series_limit(a: int, b: int, sigma: float, s: float, PsT0: float, n: int = 2) -> float:
    """lim_{M→∞} of the upper bound: finite iff s < σ."""
    lam = b ** (1.0 / (n - sigma))
    q = b ** ((s - sigma) / (n - sigma))
    if q >= 1:
        return math.inf
    return PsT0 * (1 + a / lam ** (n - s) / (1 - q))


@dataclass(frozen=True)
class FractalRow:
    M: int
    volume: float
    P_s: float
    upper: float
    lower: float
    h_value: float
    h_ball_c0: float
    h_ball_M: float
    h_ball_inf: float
    gap: float
    beta2: float
    delta: float
    delta_inf: float  # (P_s(Ω_M) - P_s(B_∞))/P_s(B_∞)
    competitor: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.gap / self.beta2


def fractal_failure_demo(fam: FractalFamily, s: float, m: float, Ms=None, seed: int = 0,
                         ref: BallReference | None = None) -> list[FractalRow]:
    """Cheeger gap, β_s² and δ_s along Ω_1, ..., Ω_M.

    h(Ω_M) is bounded above by the best of: Ω_k for k <= M, the ball B_{c0}
    inscribed in T_0, and the grid Cheeger set of T_0 on the seed grid.
    Each is a subset of Ω_M, so the bound is rigorous.
    """
    n = fam.n
    if not m > (n - s) / n:
        raise ValueError("m must exceed (n-s)/n")
    ref = ref or analytic_reference(n, s)
    Ms = list(range(1, fam.M + 1)) if Ms is None else sorted(Ms)
    T0, S0 = fractal_witness(fam)
    PsT0 = fractional_perimeter(T0, s)
    LsT0S0 = interaction(T0, S0, s)
    vol_c0 = unit_ball_volume(n) * fam.c0**n
    h_c0 = ball_cheeger(n, m, s, vol_c0, ref)
    seed_set = cheeger_heuristic(T0, m, s, seed=seed)
    vol_inf = fam.side**n * (1 + fractal_missing_volume(fam.a, fam.b, fam.sigma, 0, n))
    h_inf = ball_cheeger(n, m, s, vol_inf, ref)
    P_inf = ref.perimeter_ball((vol_inf / unit_ball_volume(n)) ** (1 / n))
    rows = []
    for M in Ms:
        E = fractal_build(fam, M)
        cands = [(h_c0, "inscribed_ball"), (seed_set.value, "seed_cheeger_set")]
        for k in range(M + 1):
            cands.append((cheeger_ratio(fractal_build(fam, k), m, s), f"union_{k}"))
        hv, comp = min(cands)
        ev = evaluate(E, s, ref)
        vol = float(E.volume)
        hB = ball_cheeger(n, m, s, vol, ref)
        up, lo = fractal_series_bounds(fam.a, fam.b, fam.sigma, s, M, PsT0, LsT0S0, n)
        rows.append(FractalRow(M, vol, ev.P, up, lo, hv, h_c0, hB, h_inf, (hv - hB) / hB, ev.beta2,
                               ev.delta, (ev.P - P_inf) / P_inf, comp,
                               {"P_s_T0": PsT0, "L_s_T0_S0": LsT0S0}))
    return rows
