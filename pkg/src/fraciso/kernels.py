"""Quadrature for the singular kernels |z|^{-(n+s)} and |z|^{-s} on unit cells.

All routines work on *unit* cells; physical values follow by the exact
scalings h^{n-s} (pair kernel) and h^{n-s} (cell potential).

The pair kernel between two unit cells at integer offset ``d`` is

    K(d) = ∫_{C_0} ∫_{C_d} |x - y|^{-(n+s)} dx dy = ∫_{[-1,1]^n} Λ(w) |w + d|^{-(n+s)} dw,

with the tent weight Λ(w) = Π_k (1 - |w_k|).  The tent support splits into
2^n unit sub-cubes.  A sub-cube touching the origin always touches it at a
vertex; there the radial integral is done in closed form after a Duffy
(pyramid) change of variables.  Every other sub-cube is integrated by
adaptive tensor Gauss-Legendre subdivision.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import hyp2f1

__all__ = [
    "KernelParams",
    "unit_cell_perimeter",
    "pair_kernel",
    "pair_kernel_orthant",
    "cell_potential_box",
    "potential_kernel_orthant",
    "symmetric_from_orthant",
]


@dataclass(frozen=True)
class KernelParams:
    """Dimension ``n`` and fractional order ``s`` of the kernel."""

    n: int
    s: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.n}")
        if not (0.0 < self.s < 1.0):
            raise ValueError(f"s must lie in (0, 1), got {self.s}")


def _check_s(s: float) -> None:
    if not (0.0 < s < 1.0):
        raise ValueError(f"s must lie in (0, 1), got {s}")


@lru_cache(maxsize=None)
def gauss01(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(p)
    return (x + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=None)
def _tensor_gauss01(p: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss01(p)
    if dim == 0:
        return np.zeros((1, 0)), np.ones(1)
    pts = np.array(list(itertools.product(x, repeat=dim)))
    wts = np.prod(np.array(list(itertools.product(w, repeat=dim))), axis=1)
    return pts, wts


def _linear_product(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Coefficients in t of Π_k (alpha_k + beta_k t), row-wise.

    alpha, beta have shape (P, n); the result has shape (P, n + 1) with
    column j holding the coefficient of t^j.
    """
    P, n = beta.shape
    alpha = np.broadcast_to(alpha, (P, n))
    c = np.zeros((P, n + 1))
    c[:, 0] = 1.0
    for k in range(n):
        new = c * alpha[:, k : k + 1]
        new[:, 1:] += c[:, :-1] * beta[:, k : k + 1]
        c = new
    return c


# ---------------------------------------------------------------------------
# unit cell perimeter
# ---------------------------------------------------------------------------

def unit_cell_perimeter(n: int, s: float, p: int = 32) -> float:
    """P_s of the unit cube [0,1]^n.

    Uses P_s(C) = ∫_{S^{n-1}} ∫_0^∞ r^{-1-s} |C \\ (C + rω)| dr dω.  For a
    direction with components a_k = |ω_k| the overlap defect is
    1 - Π(1 - r a_k) up to r0 = 1/max a_k and 1 afterwards, so the radial
    integral is elementary.  The sphere is covered by 2^n n congruent
    patches {ω ∝ (1, u), u ∈ [0,1]^{n-1}} on which the integrand is smooth.
    """
    _check_s(s)
    u, w = _tensor_gauss01(p, n - 1)
    v = np.hstack([np.ones((len(u), 1)), u])
    r0 = np.linalg.norm(v, axis=1)
    a = v / r0[:, None]
    jac = r0 ** (-n)  # dω = du / |(1,u)|^n
    coef = _linear_product(np.ones((len(u), n)), -a)  # Π(1 - r a_k)
    val = r0 ** (-s) / s
    for j in range(1, n + 1):
        val = val - coef[:, j] * r0 ** (j - s) / (j - s)
    return float(2**n * n * np.sum(w * jac * val))


# ---------------------------------------------------------------------------
# pair kernel
# ---------------------------------------------------------------------------

def _vertex_subcube(lo: np.ndarray, d: np.ndarray, s: float, p: int) -> float:
    """Tent-weighted kernel over a unit sub-cube having the origin as a vertex."""
    n = len(d)
    sigma = np.where(lo == 0, 1.0, -1.0)  # orientation: z = sigma * y, y in [0,1]^n
    sg = np.sign(lo + 0.5 - d)  # sign of z_k - d_k on the sub-cube
    alpha = 1.0 + sg * d  # Λ factor = alpha_k + beta_k y_k
    beta0 = -sg * sigma
    if abs(np.prod(alpha)) > 1e-12:
        raise AssertionError("tent weight must vanish at the singular vertex")
    u, w = _tensor_gauss01(p, n - 1)
    total = 0.0
    for k in range(n):
        xi = np.insert(u, k, 1.0, axis=1)  # face y_k = 1, y = t xi
        coef = _linear_product(alpha[None, :], beta0[None, :] * xi)
        radial = sum(coef[:, j] / (j - s) for j in range(1, n + 1))
        total += float(np.sum(w * radial * np.linalg.norm(xi, axis=1) ** (-(n + s))))
    return total


def _tent_box_gauss(lo: np.ndarray, size: float, d: np.ndarray, s: float, p: int) -> float:
    n = len(d)
    u, w = _tensor_gauss01(p, n)
    z = lo + size * u
    lam = np.prod(1.0 - np.abs(z - d), axis=1)
    r = np.linalg.norm(z, axis=1)
    return float(np.sum(w * lam * r ** (-(n + s)))) * size**n


def _adaptive_box(lo, size, d, s, tol, p=8, depth=0) -> float:
    coarse = _tent_box_gauss(lo, size, d, s, p)
    half = size / 2
    children = [lo + half * np.array(c) for c in itertools.product((0, 1), repeat=len(d))]
    fine = sum(_tent_box_gauss(c, half, d, s, p) for c in children)
    if abs(fine - coarse) <= tol * abs(fine) or depth >= 12:
        return fine
    return sum(_adaptive_box(c, half, d, s, tol, p, depth + 1) for c in children)


def pair_kernel(d, s: float, tol: float = 1e-12) -> float:
    """Pair kernel K(d) between unit cells at nonzero integer offset ``d``.

    The self term d = 0 diverges (∬_{C×C} |x-y|^{-(n+s)} = ∞ for every
    s > 0) and is returned as ``inf``; P_s never needs it because a cell
    of E and a cell of E^c are distinct.
    """
    _check_s(s)
    d = np.asarray(d, dtype=float)
    if not np.any(d):
        return math.inf
    total = 0.0
    for corner in itertools.product((-1.0, 0.0), repeat=len(d)):
        lo = d + np.array(corner)
        if np.all((lo == 0) | (lo == -1)):
            prev = _vertex_subcube(lo, d, s, 12)
            p = 24
            while True:
                cur = _vertex_subcube(lo, d, s, p)
                if abs(cur - prev) <= tol * abs(cur) or p >= 96:
                    break
                prev, p = cur, 2 * p
            total += cur
        else:
            total += _adaptive_box(lo, 1.0, d, s, tol)
    return total


def _far_pair_kernel(offsets: np.ndarray, s: float, p: int) -> np.ndarray:
    """Tent-weighted tensor Gauss rule, vectorized over well separated offsets."""
    n = offsets.shape[1]
    x, w = gauss01(p)
    x1 = np.concatenate([x - 1.0, x])
    w1 = np.concatenate([w * x, w * (1.0 - x)])  # tent weight folded in
    nodes = np.array(list(itertools.product(x1, repeat=n)))
    wts = np.prod(np.array(list(itertools.product(w1, repeat=n))), axis=1)
    out = np.empty(len(offsets))
    chunk = max(1, 2_000_000 // len(nodes))
    for a in range(0, len(offsets), chunk):
        z = offsets[a : a + chunk, None, :] + nodes[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", z, z)
        out[a : a + chunk] = r2 ** (-(n + s) / 2) @ wts
    return out


NEAR_RADIUS = 2


@lru_cache(maxsize=16)
def _pair_orthant_cached(n: int, s: float, radius: int) -> np.ndarray:
    shape = (radius + 1,) * n
    idx = np.indices(shape).reshape(n, -1).T.astype(float)
    cheb = idx.max(axis=1)
    out = np.empty(len(idx))
    # gauss orders chosen so the relative error stays below ~1e-12
    bands = [(NEAR_RADIUS + 1, 4, 24), (5, 8, 12), (9, 16, 8), (17, 48, 5), (49, np.inf, 3)]
    for lo, hi, p in bands:
        sel = (cheb >= lo) & (cheb <= hi)
        if np.any(sel):
            out[sel] = _far_pair_kernel(idx[sel], s, p)
    for i in np.flatnonzero(cheb <= NEAR_RADIUS):
        out[i] = pair_kernel(idx[i], s)
    out = out.reshape(shape)
    out.setflags(write=False)
    return out


def pair_kernel_orthant(n: int, s: float, radius: int) -> np.ndarray:
    """K(d) for all 0 <= d_k <= radius (unit cells), K(0) = inf.

    The kernel only depends on |d_k|, so the nonnegative orthant determines
    every offset.  Results are cached per (n, s) and sliced from the
    largest table built so far.
    """
    _check_s(s)
    for (nn, ss, rr), arr in list(_TABLE_STORE.items()):
        if nn == n and ss == s and rr >= radius:
            return arr[(slice(0, radius + 1),) * n]
    # round the radius up so repeated growth does not rebuild often
    r = max(8, int(2 ** math.ceil(math.log2(max(radius, 1)))))
    arr = _pair_orthant_cached(n, float(s), r)
    _TABLE_STORE[(n, float(s), r)] = arr
    return arr[(slice(0, radius + 1),) * n]


_TABLE_STORE: dict = {}


def symmetric_from_orthant(orthant: np.ndarray, extent: tuple[int, ...]) -> np.ndarray:
    """Full centered array of shape (2 e_k - 1) from an orthant table."""
    idx = [np.abs(np.arange(-e + 1, e)) for e in extent]
    return orthant[np.ix_(*idx)]


# ---------------------------------------------------------------------------
# cell potentials ∫_box |x - y|^{-s} dx
# ---------------------------------------------------------------------------

def _corner_integral_2d(a: np.ndarray, b: np.ndarray, s: float) -> np.ndarray:
    """∫_0^a ∫_0^b (x^2 + y^2)^{-s/2} dy dx for a, b >= 0 (vectorized)."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    out = np.zeros(np.broadcast(a, b).shape)
    a, b = np.broadcast_to(a, out.shape), np.broadcast_to(b, out.shape)
    ok = (a > 0) & (b > 0)
    aa, bb = a[ok], b[ok]
    # two triangles; each ∫ sec^{2-s} reduces to a Gauss hypergeometric function
    t1 = aa ** (1 - s) * bb * hyp2f1(0.5, s / 2, 1.5, -((bb / aa) ** 2))
    t2 = bb ** (1 - s) * aa * hyp2f1(0.5, s / 2, 1.5, -((aa / bb) ** 2))
    out[ok] = (t1 + t2) / (2.0 - s)
    return out


def _corner_integral_nd(a: np.ndarray, s: float, p: int = 24) -> np.ndarray:
    """∫_{Π[0,a_k]} |z|^{-s} dz, a of shape (P, n), by Duffy pyramids."""
    P, n = a.shape
    u, w = _tensor_gauss01(p, n - 1)
    out = np.zeros(P)
    vol = np.prod(a, axis=1)
    ok = vol > 0
    for k in range(n):
        xi = np.insert(u, k, 1.0, axis=1)  # (Q, n)
        pts = a[ok, None, :] * xi[None, :, :]
        out[ok] += np.linalg.norm(pts, axis=2) ** (-s) @ w
    return out * vol / (n - s)


def _signed_corner(c: np.ndarray, s: float) -> np.ndarray:
    sign = np.prod(np.sign(c), axis=-1)
    a = np.abs(c)
    if c.shape[-1] == 2:
        val = _corner_integral_2d(a[..., 0], a[..., 1], s)
    else:
        flat = a.reshape(-1, a.shape[-1])
        val = _corner_integral_nd(flat, s).reshape(a.shape[:-1])
    return sign * val


def cell_potential_box(lo: np.ndarray, hi: np.ndarray, y: np.ndarray, s: float) -> np.ndarray:
    """Exact ∫_{[lo,hi]} |x - y|^{-s} dx by inclusion-exclusion over corners.

    ``lo`` and ``hi`` have shape (P, n); ``y`` has shape (n,).  Suitable for
    boxes within a few box widths of ``y`` (cancellation grows with distance).
    """
    lo = np.atleast_2d(np.asarray(lo, float)) - y
    hi = np.atleast_2d(np.asarray(hi, float)) - y
    n = lo.shape[1]
    total = np.zeros(lo.shape[0])
    for pick in itertools.product((0, 1), repeat=n):
        corner = np.where(np.array(pick, bool), hi, lo)
        sgn = (-1) ** (n - sum(pick))
        total += sgn * _signed_corner(corner, s)
    return total


@lru_cache(maxsize=16)
def _potential_orthant_cached(n: int, s: float, radius: int) -> np.ndarray:
    shape = (radius + 1,) * n
    idx = np.indices(shape).reshape(n, -1).T.astype(float)
    cheb = idx.max(axis=1)
    out = np.empty(len(idx))
    near = cheb <= 6
    out[near] = cell_potential_box(idx[near] - 0.5, idx[near] + 0.5, np.zeros(n), s)
    far = ~near
    if np.any(far):
        x, w = gauss01(4)
        nodes = np.array(list(itertools.product(x - 0.5, repeat=n)))
        wts = np.prod(np.array(list(itertools.product(w, repeat=n))), axis=1)
        z = idx[far][:, None, :] + nodes[None, :, :]
        out[far] = np.einsum("ijk,ijk->ij", z, z) ** (-s / 2) @ wts
    out = out.reshape(shape)
    out.setflags(write=False)
    return out


def potential_kernel_orthant(n: int, s: float, radius: int) -> np.ndarray:
    """W(d) = ∫_{C_d} |x|^{-s} dx for unit cells centered at integer d (orthant)."""
    _check_s(s)
    r = max(8, int(2 ** math.ceil(math.log2(max(radius, 1)))))
    return _potential_orthant_cached(n, float(s), r)[(slice(0, radius + 1),) * n]
