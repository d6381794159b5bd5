"""Set representations: cell grids, star-shaped planar profiles, balls."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "unit_ball_volume",
    "GridSet",
    "RadialProfile",
    "Ball",
    "volume",
    "rasterize",
    "rasterize_ball",
    "from_indicator",
    "schwarz_rearrangement",
    "symmetric_difference_volume",
    "ball_overlap",
    "angles",
    "translate",
    "scale",
    "refine",
    "barycenter",
    "boundary_cells",
    "hausdorff_distance_to_ball",
]


def unit_ball_volume(n: int) -> float:
    """ω_n, the Lebesgue measure of the unit ball in R^n."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


class GridSet:
    """Union of closed cubes ``origin + h*(i + [0,1]^n)`` over occupied indices ``i``.

    Occupied indices are stored as a sorted, duplicate-free ``(N, n)`` int64
    array that is never mutated; operations return new instances.
    """

    __slots__ = ("n", "h", "origin", "cells")

    def __init__(self, cells, h: float, origin=None, n: int | None = None):
        arr = np.asarray(cells, dtype=np.int64)
        if arr.size == 0:
            if n is None:
                n = len(origin) if origin is not None else 2
            arr = np.zeros((0, n), dtype=np.int64)
        if arr.ndim != 2:
            raise ValueError("cells must be an (N, n) array of integer indices")
        n = arr.shape[1] if n is None else n
        if arr.shape[1] != n or n < 2:
            raise ValueError("cell indices must have n >= 2 components")
        if not (h > 0 and math.isfinite(h)):
            raise ValueError(f"cell size must be positive, got {h}")
        arr = np.unique(arr, axis=0)
        arr.setflags(write=False)
        origin = np.zeros(n) if origin is None else np.asarray(origin, dtype=float)
        if origin.shape != (n,):
            raise ValueError("origin has the wrong dimension")
        origin.setflags(write=False)
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "h", float(h))
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "cells", arr)

    def __setattr__(self, name, value):
        raise AttributeError("GridSet is immutable")

    # basic protocol -------------------------------------------------------
    def __len__(self) -> int:
        return len(self.cells)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridSet):
            return NotImplemented
        return (
            self.n == other.n
            and self.h == other.h
            and np.array_equal(self.origin, other.origin)
            and np.array_equal(self.cells, other.cells)
        )

    def __hash__(self):
        return hash((self.n, self.h, self.origin.tobytes(), self.cells.tobytes()))

    def __repr__(self) -> str:
        return f"GridSet(n={self.n}, h={self.h:g}, cells={len(self)})"

    @property
    def volume(self) -> float:
        return len(self.cells) * self.h**self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    def centers(self) -> np.ndarray:
        return self.origin + self.h * (self.cells + 0.5)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Inclusive index bounds (lo, hi) of the occupied cells."""
        if len(self) == 0:
            raise ValueError("empty set has no bounding box")
        return self.cells.min(axis=0), self.cells.max(axis=0)

    def to_mask(self, pad: int = 0, lo=None, shape=None) -> tuple[np.ndarray, np.ndarray]:
        """Dense boolean occupancy and the index of its first entry."""
        if lo is None:
            lo = self.cells.min(axis=0) - pad
            hi = self.cells.max(axis=0) + pad
            shape = tuple(int(v) for v in hi - lo + 1)
        lo = np.asarray(lo, dtype=np.int64)
        mask = np.zeros(shape, dtype=bool)
        loc = self.cells - lo
        if np.any(loc < 0) or np.any(loc >= np.array(shape)):
            raise ValueError("cells fall outside the requested window")
        mask[tuple(loc.T)] = True
        return mask, lo

    @classmethod
    def from_mask(cls, mask: np.ndarray, h: float, lo=None, origin=None) -> "GridSet":
        lo = np.zeros(mask.ndim, dtype=np.int64) if lo is None else np.asarray(lo, np.int64)
        cells = np.argwhere(mask) + lo
        return cls(cells, h, origin, n=mask.ndim)

    def with_cells(self, cells) -> "GridSet":
        return GridSet(cells, self.h, self.origin, n=self.n)

    def union(self, other: "GridSet") -> "GridSet":
        self._check_compatible(other)
        return self.with_cells(np.vstack([self.cells, other.cells]))

    def difference(self, other: "GridSet") -> "GridSet":
        self._check_compatible(other)
        keep = ~_rows_in(self.cells, other.cells)
        return self.with_cells(self.cells[keep])

    def intersection_count(self, other: "GridSet") -> int:
        self._check_compatible(other)
        return int(np.count_nonzero(_rows_in(self.cells, other.cells)))

    def _check_compatible(self, other: "GridSet") -> None:
        if self.n != other.n or self.h != other.h or not np.array_equal(self.origin, other.origin):
            raise ValueError("grid sets live on different lattices")

    # serialization --------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "h": self.h,
            "origin": [float(v) for v in self.origin],
            "cells": self.cells.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSet":
        return cls(d["cells"], d["h"], d["origin"], n=d["n"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GridSet":
        return cls.from_dict(json.loads(text))


def _rows_in(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if len(b) == 0 or len(a) == 0:
        return np.zeros(len(a), dtype=bool)
    dt = np.dtype((np.void, a.dtype.itemsize * a.shape[1]))
    av = np.ascontiguousarray(a).view(dt).ravel()
    bv = np.ascontiguousarray(b).view(dt).ravel()
    return np.isin(av, bv)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Planar star-shaped set {ρ(cos θ, sin θ) : 0 <= ρ < 1 + u(θ)}.

    ``samples`` holds u at θ_k = 2πk/M.  Off-node values use the
    trigonometric interpolant, so smooth profiles are resolved spectrally.
    """

    samples: np.ndarray
    center: tuple[float, float] = (0.0, 0.0)
    _coef: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        u = np.array(self.samples, dtype=float)
        if u.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        M = len(u)
        if M < 8 or M % 2:
            raise ValueError(f"need an even number M >= 8 of samples, got {M}")
        if not np.all(np.isfinite(u)) or np.any(1.0 + u <= 0):
            raise ValueError("profile must satisfy 1 + u > 0 (star-shaped set)")
        u.setflags(write=False)
        object.__setattr__(self, "samples", u)
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        c = np.fft.rfft(u) / M
        c[1:-1] *= 2.0  # cosine/sine amplitudes; Nyquist term keeps weight 1
        c.setflags(write=False)
        object.__setattr__(self, "_coef", c)

    n = 2

    @property
    def M(self) -> int:
        return len(self.samples)

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray], M: int, center=(0.0, 0.0)):
        return cls(f(angles(M)), center)

    @classmethod
    def constant(cls, c: float, M: int = 64) -> "RadialProfile":
        return cls(np.full(M, float(c)))

    @property
    def theta(self) -> np.ndarray:
        return angles(self.M)

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def radius(self) -> np.ndarray:
        return 1.0 + self.samples

    def evaluate(self, theta) -> np.ndarray:
        """Trigonometric interpolant of u at arbitrary angles."""
        theta = np.asarray(theta, dtype=float)
        flat = theta.ravel()
        out = np.empty(flat.shape)
        c = self._coef
        k = np.arange(len(c))
        step = max(1, 4_000_000 // len(c))
        for a in range(0, len(flat), step):
            ph = np.exp(1j * np.outer(flat[a : a + step], k))
            out[a : a + step] = np.real(ph @ c)
        return out.reshape(theta.shape)

    def derivative(self) -> np.ndarray:
        """u'(θ_k) by spectral differentiation."""
        M = self.M
        k = np.fft.rfftfreq(M, 1.0 / M)
        uh = np.fft.rfft(self.samples)
        uh = 1j * k * uh
        uh[-1] = 0.0  # Nyquist derivative is not representable
        return np.fft.irfft(uh, M)

    def resample(self, M: int) -> "RadialProfile":
        """Band-limited resampling to ``M`` nodes."""
        if M == self.M:
            return self
        return RadialProfile(self.evaluate(angles(M)), self.center)

    def area(self) -> float:
        """Exact area of the trigonometric set (trapezoid rule on (1+u)^2 / 2)."""
        r = 1.0 + self.samples
        return float(math.pi * np.mean(r * r))

    @property
    def volume(self) -> float:
        return self.area()

    def boundary(self) -> tuple[np.ndarray, np.ndarray]:
        """Boundary points x(θ_k) and tangents x'(θ_k), as complex numbers."""
        th = self.theta
        e = np.exp(1j * th)
        r = 1.0 + self.samples
        x = r * e + complex(*self.center)
        dx = (self.derivative() + 1j * r) * e
        return x, dx

    def translated(self, v) -> "RadialProfile":
        return RadialProfile(self.samples, (self.center[0] + v[0], self.center[1] + v[1]))

    def to_dict(self) -> dict:
        d = {"M": self.M, "samples": [float(v) for v in self.samples]}
        if self.center != (0.0, 0.0):
            d["center"] = list(self.center)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RadialProfile":
        samples = d["samples"]
        if len(samples) != d["M"]:
            raise ValueError("sample count does not match M")
        return cls(np.array(samples, dtype=float), tuple(d.get("center", (0.0, 0.0))))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "RadialProfile":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, RadialProfile):
            return NotImplemented
        return self.center == other.center and np.array_equal(self.samples, other.samples)

    def __hash__(self):
        return hash((self.samples.tobytes(), self.center))


def angles(M: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(M) / M


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.center))
        if len(c) < 2:
            raise ValueError("ball center must have at least two coordinates")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        return unit_ball_volume(self.n) * self.radius**self.n

    def contains(self, pts: np.ndarray) -> np.ndarray:
        d = np.asarray(pts) - np.array(self.center)
        return np.einsum("ij,ij->i", d, d) < self.radius**2


def volume(E) -> float:
    """|E| for a GridSet (exact cell count times h^n), profile or ball."""
    return float(E.volume)


def _grid_box(lo: np.ndarray, hi: np.ndarray, h: float, origin: np.ndarray):
    ilo = np.floor((lo - origin) / h).astype(np.int64) - 1
    ihi = np.ceil((hi - origin) / h).astype(np.int64) + 1
    axes = [origin[k] + h * (np.arange(ilo[k], ihi[k]) + 0.5) for k in range(len(lo))]
    return ilo, axes


def from_indicator(
    inside: Callable[[np.ndarray], np.ndarray],
    lo: Sequence[float],
    hi: Sequence[float],
    h: float,
    origin=None,
) -> GridSet:
    """Rasterize by the cell-center rule; ``inside`` maps (P, n) points to bools."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    n = len(lo)
    origin = np.zeros(n) if origin is None else np.asarray(origin, float)
    ilo, axes = _grid_box(lo, hi, h, origin)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    mask = np.asarray(inside(pts)).reshape(mesh[0].shape)
    return GridSet.from_mask(mask, h, lo=ilo, origin=origin)


def rasterize_ball(B: Ball, h: float, origin=None) -> GridSet:
    c = np.array(B.center)
    return from_indicator(B.contains, c - B.radius, c + B.radius, h, origin)


def rasterize(P: RadialProfile, h: float, origin=None) -> GridSet:
    """Cells whose center lies in {ρθ : 0 <= ρ < 1 + u(θ)} (plus the profile center)."""
    r = 1.0 + P.samples
    if h >= r.min():
        raise ValueError("cell size exceeds the minimal radial extent of the profile")
    c = np.array(P.center)
    # the interpolant may overshoot the nodes; bracket it on a finer sampling
    fine = 1.0 + P.evaluate(angles(8 * P.M))
    spread = float(fine.max() - fine.min())
    rin = float(fine.min()) - 0.01 * spread - 1e-12
    rout = float(fine.max()) + 0.01 * spread + 1e-12

    def inside(pts):
        d = pts - c
        rho = np.hypot(d[:, 0], d[:, 1])
        res = rho < rin
        band = (~res) & (rho < rout)
        if np.any(band):
            th = np.arctan2(d[band, 1], d[band, 0])
            res[band] = rho[band] < 1.0 + P.evaluate(th)
        return res

    return from_indicator(inside, c - rout, c + rout, h, origin)


def schwarz_rearrangement(E) -> Ball:
    """Origin-centered ball with |B| = |E|."""
    v = volume(E)
    if v <= 0:
        raise ValueError("rearrangement of an empty set")
    n = E.n
    return Ball((0.0,) * n, (v / unit_ball_volume(n)) ** (1.0 / n))


def ball_overlap(E: GridSet, B: Ball, subsample: int = 1) -> float:
    """|E ∩ B|; cells cut by ∂B are resolved on a ``subsample``^n point lattice."""
    if E.n != B.n:
        raise ValueError("dimension mismatch")
    if len(E) == 0:
        return 0.0
    pts = E.centers()
    if subsample <= 1:
        return int(np.count_nonzero(B.contains(pts))) * E.cell_volume
    dist = np.linalg.norm(pts - np.array(B.center), axis=1)
    half = 0.5 * E.h * math.sqrt(E.n)
    full = int(np.count_nonzero(dist < B.radius - half))
    cut = pts[np.abs(dist - B.radius) <= half]
    if len(cut) == 0:
        return full * E.cell_volume
    off = (np.arange(subsample) + 0.5) / subsample - 0.5
    sub = np.stack(np.meshgrid(*([off] * E.n), indexing="ij"), axis=-1).reshape(-1, E.n) * E.h
    hits = B.contains((cut[:, None, :] + sub[None]).reshape(-1, E.n))
    frac = np.count_nonzero(hits) / len(sub)
    return (full + frac) * E.cell_volume


def symmetric_difference_volume(E: GridSet, B: Ball, subsample: int = 1) -> float:
    """|E Δ B| with membership of cells decided at cell centers (or sub-cell points)."""
    return E.volume + B.volume - 2.0 * ball_overlap(E, B, subsample)


def translate(E: GridSet, v) -> GridSet:
    """Shift by the lattice vector nearest to ``v``."""
    step = np.rint(np.asarray(v, float) / E.h).astype(np.int64)
    return E.with_cells(E.cells + step)


def scale(E: GridSet, lam: float) -> GridSet:
    """The set λE: identical occupancy on a lattice with cell size λh."""
    if not lam > 0:
        raise ValueError("scale factor must be positive")
    if lam == 1:
        return E
    return GridSet(E.cells, E.h * lam, E.origin * lam, n=E.n)


def refine(E: GridSet, k: int) -> GridSet:
    """The same set with every cell split into k^n cells of size h/k."""
    if k < 1 or int(k) != k:
        raise ValueError("refinement factor must be a positive integer")
    if k == 1:
        return E
    offs = np.stack(np.meshgrid(*[np.arange(k)] * E.n, indexing="ij"), axis=-1).reshape(-1, E.n)
    cells = (k * E.cells[:, None, :] + offs[None, :, :]).reshape(-1, E.n)
    return GridSet(cells, E.h / k, E.origin, n=E.n)


def barycenter(E) -> np.ndarray:
    if isinstance(E, RadialProfile):
        from .spherical import profile_barycenter

        return profile_barycenter(E)
    if len(E) == 0:
        raise ValueError("barycenter of an empty set")
    return E.centers().mean(axis=0)


def boundary_cells(E: GridSet) -> np.ndarray:
    """Indices of occupied cells with a face neighbour outside E."""
    mask, lo = E.to_mask(pad=1)
    inner = mask.copy()
    for k in range(E.n):
        inner &= np.roll(mask, 1, axis=k) & np.roll(mask, -1, axis=k)
    return np.argwhere(mask & ~inner) + lo


def _sphere_samples(B: Ball, spacing: float) -> np.ndarray:
    c = np.array(B.center)
    if B.n == 2:
        m = max(16, int(math.ceil(2 * math.pi * B.radius / spacing)))
        t = angles(m)
        return c + B.radius * np.stack([np.cos(t), np.sin(t)], axis=1)
    if B.n == 3:
        m = max(64, int(math.ceil(4 * math.pi * B.radius**2 / spacing**2)))
        i = np.arange(m) + 0.5
        phi = np.arccos(1 - 2 * i / m)
        th = math.pi * (1 + 5**0.5) * i
        d = np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=1)
        return c + B.radius * d
    raise NotImplementedError("sphere sampling implemented for n = 2, 3")


def hausdorff_distance_to_ball(E: GridSet, B: Ball) -> float:
    """Hausdorff distance between ∂E and ∂B at cell-center resolution."""
    if len(E) == 0:
        raise ValueError("empty set")
    bc = E.origin + E.h * (boundary_cells(E) + 0.5)
    c = np.array(B.center)
    d1 = float(np.max(np.abs(np.linalg.norm(bc - c, axis=1) - B.radius)))
    pts = _sphere_samples(B, E.h / 2)
    d2 = float(np.max(cKDTree(bc).query(pts)[0]))
    return max(d1, d2)
