"""Fractional perimeter, pair interactions, Riesz potentials and V_s.

Grid sets are treated exactly as unions of cubes.  Writing ``K`` for the
cell-pair kernel, the complement never has to be enumerated:

    P_s(E) = Σ_{i∈E} Σ_{j∉E} K(i-j) = N·P_s(C) - Σ_{i≠j∈E} K(i-j),

because Σ_{j≠i} K(i-j) = P_s(C) for a single cell C.  The pair sum is one
FFT convolution.  Star-shaped planar profiles use the boundary identity

    P_s(E) = s^{-2} ∬ |x(θ)-x(φ)|^{-s} x'(θ)·x'(φ) dθ dφ        (n = 2)

obtained from Δ|z|^{-s} = s²|z|^{-s-2} and two applications of the
divergence theorem; its log-free singularity |2 sin((θ-φ)/2)|^{-s} is
integrated with exact Fourier product weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache, singledispatch

import numpy as np
from scipy import integrate, ndimage, optimize, special
from scipy.signal import fftconvolve

from .geometry import GridSet, RadialProfile, barycenter, unit_ball_volume
from .kernels import (
    KernelParams,
    cell_potential_box,
    pair_kernel_orthant,
    potential_kernel_orthant,
    symmetric_from_orthant,
    unit_cell_perimeter,
)

__all__ = [
    "KernelParams",
    "InteractionTable",
    "TailModel",
    "build_interaction_table",
    "fractional_perimeter",
    "perimeter_bracket",
    "interaction",
    "riesz_potential",
    "potential_field",
    "vs_value",
    "VsResult",
    "vs_center_stability",
    "ball_perimeter",
    "ball_perimeter_lens",
    "ball_potential",
    "monte_carlo_ball_perimeter",
    "fsum",
]


def fsum(values) -> float:
    """Correctly rounded sum; independent of ordering, hence reproducible."""
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InteractionTable:
    """Cell-pair kernel values for cells of size ``h``.

    ``unit`` stores K(d) for unit cells on the orthant 0 <= d_k <= radius;
    physical values are h^{n-s} K(d).  The self term is infinite.
    """

    params: KernelParams
    h: float
    radius: int
    unit: np.ndarray = field(repr=False)
    tau_near: float = 1e-6

    @property
    def factor(self) -> float:
        return self.h ** (self.params.n - self.params.s)

    def value(self, delta) -> float:
        d = np.abs(np.asarray(delta, dtype=np.int64))
        if d.shape != (self.params.n,):
            raise ValueError("offset has the wrong dimension")
        if np.any(d > self.radius):
            # beyond the table every sub-cube is far: use the same rule on demand
            from .kernels import _far_pair_kernel

            return float(self.factor * _far_pair_kernel(d[None, :].astype(float), self.params.s, 3)[0])
        return float(self.factor * self.unit[tuple(d)])

    @property
    def cell_perimeter(self) -> float:
        return self.factor * unit_cell_perimeter(self.params.n, self.params.s)

    def dense(self, extent) -> np.ndarray:
        """Unit-cell kernel on the centered window of half-widths extent-1 (self term 0)."""
        full = np.array(symmetric_from_orthant(self.unit, tuple(extent)))
        full[tuple(e - 1 for e in extent)] = 0.0
        return full


def build_interaction_table(params: KernelParams, h: float, tau_near: float = 1e-6, radius: int = 64) -> InteractionTable:
    """Pair-kernel table for cell size ``h`` covering offsets up to ``radius``.

    Near offsets (|d|∞ <= 2) are integrated adaptively to a relative
    tolerance well below ``tau_near``; farther offsets use tensor Gauss
    rules whose order decreases with distance.
    """
    if not (0 < tau_near <= 1e-3):
        raise ValueError("tau_near must lie in (0, 1e-3]")
    if not h > 0:
        raise ValueError("cell size must be positive")
    unit = pair_kernel_orthant(params.n, params.s, radius)
    return InteractionTable(params, float(h), int(radius), unit, tau_near)


def _table_for(E: GridSet, s: float, table: InteractionTable | None, extent) -> InteractionTable:
    need = int(max(extent))
    if table is None:
        return build_interaction_table(KernelParams(E.n, s), E.h, radius=need)
    if table.params.n != E.n or table.params.s != s or table.h != E.h:
        raise ValueError("interaction table does not match (n, s, h) of the set")
    if table.radius < need:
        return build_interaction_table(table.params, table.h, table.tau_near, need)
    return table


# ---------------------------------------------------------------------------
# fractional perimeter
# ---------------------------------------------------------------------------

def pair_field(mask: np.ndarray, s: float) -> np.ndarray:
    """(K * χ)_i = Σ_{j≠i} χ_j K(i-j) in unit-cell normalisation."""
    extent = mask.shape
    K = symmetric_from_orthant(pair_kernel_orthant(mask.ndim, s, max(extent)), extent).copy()
    K[tuple(e - 1 for e in extent)] = 0.0
    return fftconvolve(mask.astype(float), K, mode="same")


@singledispatch
def fractional_perimeter(E, s: float, table: InteractionTable | None = None) -> float:
    """P_s(E) = ∫_E ∫_{E^c} |x-y|^{-(n+s)} dx dy."""
    raise TypeError(f"unsupported set type {type(E).__name__}")


@fractional_perimeter.register
def _(E: GridSet, s: float, table: InteractionTable | None = None) -> float:
    KernelParams(E.n, s)
    if len(E) == 0:
        return 0.0
    mask, _ = E.to_mask()
    tab = _table_for(E, s, table, mask.shape)
    K = tab.dense(mask.shape)
    field_ = fftconvolve(mask.astype(float), K, mode="same")
    pairs = fsum(field_[mask])
    return tab.factor * (len(E) * unit_cell_perimeter(E.n, s) - pairs)


@lru_cache(maxsize=64)
def _product_weights(M: int, s: float) -> np.ndarray:
    """Weights w_m with Σ_m w_m f(τ_m) = ∫_0^{2π} |2 sin(τ/2)|^{-s} f(τ) dτ for trig f."""
    c = _sine_power_coefficients(M // 2, -s / 2)
    c[-1] *= 0.5
    tau = 2 * np.pi * np.arange(M) / M
    q = np.arange(1, M // 2 + 1)
    return (2 * np.pi / M) * (c[0] + 2.0 * np.cos(np.outer(tau, q)) @ c[1:])


def _sine_power_coefficients(Q: int, a: float) -> np.ndarray:
    """(1/2π) ∫ |2 sin(τ/2)|^{2a} cos(qτ) dτ for q = 0..Q (analytic in a)."""
    c = np.empty(Q + 1)
    c[0] = special.gamma(2 * a + 1) / special.gamma(a + 1) ** 2
    for q in range(Q):
        c[q + 1] = c[q] * (q - a) / (q + a + 1)
    return c


@fractional_perimeter.register
def _(E: RadialProfile, s: float, table=None) -> float:
    KernelParams(2, s)
    x, dx = E.boundary()
    M = E.M
    w = _product_weights(M, float(s))
    tau = 2 * np.pi * np.arange(M) / M
    chord = np.abs(2 * np.sin(tau / 2))
    chord[0] = 1.0
    speed = np.abs(dx)
    idx = np.arange(M)
    rows = []
    step = max(1, 2_000_000 // M)
    for a in range(0, M, step):
        j = np.arange(a, min(M, a + step))
        k = (j[:, None] + idx[None, :]) % M
        ratio = np.abs(x[k] - x[j, None]) / chord[None, :]
        ratio[:, 0] = speed[j]
        dot = np.real(dx[k] * np.conj(dx[j, None]))
        rows.append((ratio ** (-s) * dot) @ w)
    return fsum(np.concatenate(rows)) * (2 * np.pi / M) / s**2


# ---------------------------------------------------------------------------
# tail model and truncated-complement bracket
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailModel:
    """Bound for the interaction of a cell with everything outside a ball.

    For z inside B_R(c),  ∫_{B_R(c)^c} |z-y|^{-(n+s)} dy <= nω_n/s (R-|z-c|)^{-s}.
    """

    R: float
    center: tuple = (0.0, 0.0)

    def per_cell(self, points: np.ndarray, cell_volume: float, s: float) -> np.ndarray:
        n = points.shape[1]
        dist = self.R - np.linalg.norm(points - np.array(self.center), axis=1)
        if np.any(dist <= 0):
            raise ValueError("tail radius must exceed the set's extent")
        return cell_volume * n * unit_ball_volume(n) / s * dist ** (-s)


def perimeter_bracket(E: GridSet, s: float, R: float, center=None) -> tuple[float, float]:
    """Lower and upper bounds for P_s(E) from an explicit complement inside B_R.

    The lower bound sums cell pairs (i ∈ E, j ∉ E) with cell j centered in
    B_R; the upper bound adds the analytic tail bound for the rest.  The
    bracket width shrinks like R^{-s}.
    """
    if len(E) == 0:
        return 0.0, 0.0
    c = barycenter(E) if center is None else np.asarray(center, float)
    pts = E.centers()
    lo_pt = c - R
    hi_pt = c + R
    ilo = np.floor((lo_pt - E.origin) / E.h).astype(np.int64)
    ihi = np.ceil((hi_pt - E.origin) / E.h).astype(np.int64)
    shape = tuple(int(v) for v in ihi - ilo + 1)
    mask, _ = E.to_mask(lo=ilo, shape=shape)
    axes = [E.origin[k] + E.h * (np.arange(ilo[k], ihi[k] + 1) + 0.5) for k in range(E.n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    r2 = sum((m - c[k]) ** 2 for k, m in enumerate(mesh))
    comp = (~mask) & (r2 < R * R)
    K = symmetric_from_orthant(pair_kernel_orthant(E.n, s, max(shape)), shape).copy()
    K[tuple(e - 1 for e in shape)] = 0.0
    fld = fftconvolve(comp.astype(float), K, mode="same")
    factor = E.h ** (E.n - s)
    lower = factor * fsum(fld[mask])
    # cells with center outside B_R cover at most B_{R - h√n/2}^c
    tail = TailModel(R - E.h * math.sqrt(E.n) / 2, tuple(c))
    upper = lower + fsum(tail.per_cell(pts, E.cell_volume, s))
    return lower, upper


# ---------------------------------------------------------------------------
# interaction L_s(A, B)
# ---------------------------------------------------------------------------

def interaction(A: GridSet, B: GridSet, s: float, table: InteractionTable | None = None) -> float:
    """L_s(A, B) = ∫_A ∫_B |x-y|^{-(n+s)} dx dy for cellwise disjoint grid sets."""
    A._check_compatible(B)
    if len(A) == 0 or len(B) == 0:
        return 0.0
    if A.intersection_count(B):
        raise ValueError("interaction requires cellwise disjoint sets")
    both = A.union(B)
    lo, hi = both.bounding_box()
    shape = tuple(int(v) for v in hi - lo + 1)
    ma, _ = A.to_mask(lo=lo, shape=shape)
    mb, _ = B.to_mask(lo=lo, shape=shape)
    tab = _table_for(A, s, table, shape)
    K = tab.dense(shape)
    fld = fftconvolve(mb.astype(float), K, mode="same")
    return tab.factor * fsum(fld[ma])


# ---------------------------------------------------------------------------
# Riesz potential
# ---------------------------------------------------------------------------

NEAR_CELLS = 3  # cells within this Chebyshev distance of y are integrated exactly


@singledispatch
def riesz_potential(E, y, s: float) -> float:
    """∫_E |x-y|^{-s} dx."""
    raise TypeError(f"unsupported set type {type(E).__name__}")


def _grid_potential_terms(E: GridSet, y: np.ndarray, s: float) -> np.ndarray:
    n = E.n
    z = (E.centers() - y) / E.h  # unit-cell coordinates
    cheb = np.abs(z).max(axis=1)
    near = cheb <= NEAR_CELLS + 0.5
    out = np.empty(len(z))
    far = ~near
    r2 = np.einsum("ij,ij->i", z[far], z[far])
    # midpoint rule plus its second-order correction (1/24) Δ|z|^{-s}
    out[far] = r2 ** (-s / 2) * (1.0 + s * (s + 2 - n) / (24.0 * r2))
    if np.any(near):
        out[near] = cell_potential_box(z[near] - 0.5, z[near] + 0.5, np.zeros(n), s)
    return out * E.h ** (n - s)


@riesz_potential.register
def _(E: GridSet, y, s: float) -> float:
    if len(E) == 0:
        return 0.0
    return fsum(_grid_potential_terms(E, np.asarray(y, float), s))


def _profile_nodes(E: RadialProfile, Mmin: int = 512):
    P = E if E.M >= Mmin else E.resample(Mmin)
    x, dx = P.boundary()
    return x, dx, 2 * np.pi / P.M


@riesz_potential.register
def _(E: RadialProfile, y, s: float) -> float:
    # div(|z|^{-s} z) = (n - s)|z|^{-s} turns the area integral into a smooth boundary integral
    x, dx, dth = _profile_nodes(E)
    z = x - complex(*np.asarray(y, float))
    vals = np.abs(z) ** (-s) * np.imag(np.conj(z) * dx)
    return fsum(vals) * dth / (2.0 - s)


def _profile_potential_grad(E: RadialProfile, y, s: float):
    x, dx, dth = _profile_nodes(E)
    z = x - complex(*y)
    a = np.abs(z) ** (-s)
    val = fsum(a * np.imag(np.conj(z) * dx)) * dth / (2.0 - s)
    g = np.sum(a * 1j * dx) * dth  # ∇U = -∫ |x-y|^{-s} ν dH
    return val, np.array([g.real, g.imag])


def potential_field(E: GridSet, s: float, pad: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Riesz potential at every cell center of the bounding window (plus ``pad``)."""
    mask, lo = E.to_mask(pad=pad)
    W = symmetric_from_orthant(potential_kernel_orthant(E.n, s, max(mask.shape)), mask.shape)
    fld = fftconvolve(mask.astype(float), W, mode="same") * E.h ** (E.n - s)
    return fld, lo


# ---------------------------------------------------------------------------
# V_s
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VsResult:
    value: float
    center: np.ndarray
    local_maxima: tuple = ()
    nonunique: bool = False

    def __iter__(self):
        yield self.value
        yield self.center


def _compass_max(f, y0, step, min_step, n):
    y = np.array(y0, float)
    fy = f(y)
    dirs = np.vstack([np.eye(n), -np.eye(n)])
    while step >= min_step:
        moved = False
        for d in dirs:
            cand = y + step * d
            fc = f(cand)
            if fc > fy:
                y, fy, moved = cand, fc, True
                break
        if not moved:
            step /= 2
    return fy, y


def search_seeds(E: GridSet, fld: np.ndarray | None = None, lo=None, extra: int = 8) -> list:
    """Barycenter, deepest cell, and the strongest local maxima of a lattice field."""
    seeds = [barycenter(E)]
    mask, mlo = E.to_mask(pad=1)
    depth = ndimage.distance_transform_edt(mask)
    seeds.append(E.origin + E.h * (np.array(np.unravel_index(np.argmax(depth), mask.shape)) + mlo + 0.5))
    if fld is not None:
        peaks = (fld == ndimage.maximum_filter(fld, size=3, mode="constant", cval=-np.inf)) & (fld > 0)
        idx = np.argwhere(peaks)
        order = np.lexsort((*(idx[:, k] for k in reversed(range(idx.shape[1]))), -fld[peaks]))
        for i in idx[order][:extra]:
            seeds.append(E.origin + E.h * (i + lo + 0.5))
    return seeds


def vs_value(E, s: float, min_step_frac: float = 1 / 8, rel_tol: float = 1e-6) -> VsResult:
    """V_s(E) = max_y ∫_E |x-y|^{-s} dx with one maximizing center.

    Grid sets: compass search from several seeds (barycenter, deepest cell,
    strongest lattice peaks of the FFT potential field) with step halving
    down to ``min_step_frac``·h.  Profiles: quasi-Newton ascent on the
    boundary-integral representation, which is smooth inside the set.
    ``nonunique`` flags distinct centers whose values agree within
    ``rel_tol``.
    """
    if isinstance(E, RadialProfile):
        return _vs_profile(E, s)
    if len(E) == 0:
        raise ValueError("V_s of an empty set")
    fld, lo = potential_field(E, s)
    seeds = search_seeds(E, fld, lo)
    f = lambda y: riesz_potential(E, y, s)
    found = []
    for y0 in seeds:
        val, y = _compass_max(f, y0, E.h, E.h * min_step_frac, E.n)
        found.append((val, tuple(y)))
    return _collect(found, E.h, rel_tol)


def _collect(found, scale_len, rel_tol) -> VsResult:
    found.sort(key=lambda t: (-t[0], t[1]))
    best_val, best_y = found[0]
    distinct = []
    for val, y in found:
        if all(np.linalg.norm(np.subtract(y, d[1])) > 2 * scale_len for d in distinct):
            distinct.append((val, y))
    nonunique = any(
        abs(v - best_val) <= rel_tol * best_val and np.linalg.norm(np.subtract(y, best_y)) > 2 * scale_len
        for v, y in distinct[1:]
    )
    return VsResult(best_val, np.array(best_y), tuple(distinct), nonunique)


def _vs_profile(E: RadialProfile, s: float) -> VsResult:
    neg = lambda y: tuple(-v for v in _profile_potential_grad(E, y, s))
    seeds = [np.array(E.center), barycenter(E)]
    found = []
    for y0 in seeds:
        res = optimize.minimize(lambda y: neg(y)[0], y0, jac=lambda y: neg(y)[1], method="BFGS",
                                options={"gtol": 1e-11})
        found.append((-float(res.fun), tuple(res.x)))
    return _collect(found, 1e-6, 1e-9)


def vs_center_stability(F, s: float) -> float:
    """Distance from the origin to the V_s-center of F."""
    return float(np.linalg.norm(vs_value(F, s).center))


# ---------------------------------------------------------------------------
# ball references
# ---------------------------------------------------------------------------

def ball_potential(n: int, s: float, r: float = 1.0) -> float:
    """V_s(B_r) = nω_n r^{n-s}/(n-s), attained at the center."""
    return n * unit_ball_volume(n) * r ** (n - s) / (n - s)


def _lens_deficit(n: int, d) -> np.ndarray:
    """ω_n - |B_1 ∩ (B_1 + d e_1)|, written without cancellation."""
    d = np.asarray(d, float)
    out = unit_ball_volume(n) * special.betainc(0.5, (n + 1) / 2, np.clip(d * d / 4, 0, 1))
    return np.where(d < 2, out, unit_ball_volume(n))


def ball_perimeter_lens(n: int, s: float) -> float:
    """P_s(B_1) = nω_n ∫_0^∞ r^{-1-s} (ω_n - |B_1 ∩ (B_1 + r e)|) dr.

    The deficit is ~ c r near 0, so the piece on (0, 1/2) is integrated with
    the algebraic weight r^{-s}; the rest is smooth.
    """
    KernelParams(n, s)
    w = unit_ball_volume(n)
    slope = w / special.beta(0.5, (n + 1) / 2)
    g = lambda r: float(_lens_deficit(n, r)) / r if r > 0 else slope
    near = integrate.quad(g, 0, 0.5, weight="alg", wvar=(-s, 0), epsabs=0, epsrel=1e-13, limit=200)[0]
    mid = integrate.quad(lambda r: r ** (-1 - s) * float(_lens_deficit(n, r)), 0.5, 2, epsabs=0,
                         epsrel=1e-13, limit=200)[0]
    return n * w * (near + mid + w * 2 ** (-s) / s)


def ball_perimeter(n: int, s: float) -> float:
    """P_s(B_1).  Closed form in the plane, lens quadrature otherwise."""
    KernelParams(n, s)
    if n == 2:
        c1 = -special.gamma(1 - s) / (special.gamma(2 - s / 2) * special.gamma(-s / 2))
        return 4 * math.pi**2 * c1 / s**2
    return ball_perimeter_lens(n, s)


def monte_carlo_ball_perimeter(n: int, s: float, samples: int = 10**7, seed: int = 0,
                               chunk: int = 10**6) -> tuple[float, float]:
    """Independent estimate of P_s(B_1) and its standard error.

    For x ∈ B_1 and a direction ω the ray from x leaves the ball at distance
    d(x, ω) and ∫_{B^c} |x-y|^{-n-s} dy = (1/s) ∫_{S^{n-1}} d^{-s} dω.  Points
    are drawn with density ∝ (1-|x|)^{-b} to tame the boundary layer.
    """
    rng = np.random.default_rng(seed)
    b = min(0.9, max(0.0, 2 * s - 0.5))
    w_n = unit_ball_volume(n)
    area = n * w_n
    acc, acc2, cnt = 0.0, 0.0, 0
    while cnt < samples:
        m = min(chunk, samples - cnt)
        # δ = 1 - |x| with density ∝ δ^{-b} (1-δ)^{n-1} via rejection-free mixture:
        # draw δ ∝ δ^{-b} on (0,1) and reweight by the radial Jacobian
        t = 1.0 - rng.random(m)  # in (0, 1]
        delta = t ** (1.0 / (1.0 - b))
        q = (1.0 - b) * delta ** (-b)  # density of delta
        rad = 1.0 - delta
        dirx = rng.normal(size=(m, n))
        dirx /= np.linalg.norm(dirx, axis=1)[:, None]
        x = rad[:, None] * dirx
        om = rng.normal(size=(m, n))
        om /= np.linalg.norm(om, axis=1)[:, None]
        xo = np.einsum("ij,ij->i", x, om)
        gap = delta * (2.0 - delta)  # 1 - |x|^2 without rounding to zero
        root = np.sqrt(xo * xo + gap)
        # distance to the sphere along ω, in the cancellation-free form
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(xo > 0, gap / (xo + root), root - xo)
        # ∫_B f dx = ∫_0^1 area·(1-δ)^{n-1} f dδ
        val = area * rad ** (n - 1) / q * area * d ** (-s) / s
        acc += float(val.sum())
        acc2 += float((val * val).sum())
        cnt += m
    mean = acc / cnt
    err = math.sqrt(max(acc2 / cnt - mean * mean, 0.0) / cnt)
    return mean, err
