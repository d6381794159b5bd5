"""Named test sets, each normalized to |E| = ω_n.

Grid sets are rasterized at cell size h and then rescaled exactly (the
cell size absorbs the factor), so their volume is ω_n to rounding.  Planar
profiles are rescaled radially.  The ball is the exception: it stays on the
requested grid so that its perimeter can be compared with the cached
grid-ball value at that h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .families import FractalFamily, fractal_build, oscillating_set
from .geometry import Ball, GridSet, RadialProfile, from_indicator, rasterize_ball, scale, unit_ball_volume

__all__ = [
    "CorpusEntry",
    "DEFAULT_CORPUS",
    "normalize_volume",
    "make_set",
    "corpus",
    "random_grid_set",
    "random_small_domain",
    "parse_names",
]

DEFAULT_CORPUS = (
    "ball", "ellipse", "square", "annulus", "dumbbell", "two-balls",
    "oscillating:4:0.1", "fractal:1", "perturbed:3:0.1",
)


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    set: object
    is_ball: bool = False

    @property
    def kind(self) -> str:
        return "profile" if isinstance(self.set, RadialProfile) else "grid"


def normalize_volume(E, target: float | None = None):
    """Exact dilation of E to volume ``target`` (default ω_n)."""
    target = unit_ball_volume(E.n) if target is None else target
    lam = (target / float(E.volume)) ** (1.0 / E.n)
    if isinstance(E, RadialProfile):
        c = tuple(np.array(E.center) * lam)
        return RadialProfile((1.0 + E.samples) * lam - 1.0, c)
    return scale(E, lam)


def _planar(inside: Callable, extent: float, h: float) -> GridSet:
    return from_indicator(inside, (-extent, -extent), (extent, extent), h)


def _ellipse(h, aspect=2.0):
    a, b = math.sqrt(aspect), 1 / math.sqrt(aspect)
    return _planar(lambda p: (p[:, 0] / a) ** 2 + (p[:, 1] / b) ** 2 < 1, a, h)


def _square(h):
    c = math.sqrt(math.pi) / 2
    return _planar(lambda p: np.max(np.abs(p), axis=1) < c, c, h)


def _annulus(h):
    ro = 2 / math.sqrt(3)
    return _planar(lambda p: (np.hypot(p[:, 0], p[:, 1]) < ro) & (np.hypot(p[:, 0], p[:, 1]) >= ro / 2), ro, h)


def _dumbbell(h):
    r = 0.5

    def inside(p):
        x, y = p[:, 0], p[:, 1]
        lobes = (np.hypot(x - 2 * r, y) < r) | (np.hypot(x + 2 * r, y) < r)
        bar = (np.abs(x) <= 2 * r) & (np.abs(y) < r / 3)
        return lobes | bar

    return _planar(inside, 3 * r, h)


def _two_balls(h):
    r = 1 / math.sqrt(2)

    def inside(p):
        return (np.hypot(p[:, 0] - 1.25 * r, p[:, 1]) < r) | (np.hypot(p[:, 0] + 1.25 * r, p[:, 1]) < r)

    return _planar(inside, 2.25 * r, h)


def _perturbed(k: int, t: float, M: int = 256) -> RadialProfile:
    return RadialProfile.from_function(lambda th: t * np.sin(k * th), max(M, 32 * k))


def parse_names(names) -> list[str]:
    """Names from a comma-separated string or a list; 'default' expands."""
    if isinstance(names, str):
        names = [p for p in names.split(",") if p]
    out = []
    for name in names:
        out.extend(DEFAULT_CORPUS if name == "default" else [name])
    return out


def make_set(name: str, h: float, n: int = 2) -> CorpusEntry:
    """Build one corpus set by name.

    Names: ball, ellipse, square, annulus, dumbbell, two-balls,
    oscillating:j:ε, fractal:M, perturbed:k:t.
    """
    if n != 2 and name != "ball":
        raise ValueError("only the ball is available outside the plane")
    head, *args = name.split(":")
    if head == "ball":
        return CorpusEntry(name, rasterize_ball(Ball((0.0,) * n, 1.0), h), True)
    builders = {"ellipse": _ellipse, "square": _square, "annulus": _annulus,
                "dumbbell": _dumbbell, "two-balls": _two_balls}
    if head in builders:
        return CorpusEntry(name, normalize_volume(builders[head](h)))
    if head == "oscillating":
        j, eps = (int(args[0]), float(args[1])) if args else (4, 0.1)
        return CorpusEntry(name, normalize_volume(oscillating_set(j, eps)))
    if head == "perturbed":
        k, t = (int(args[0]), float(args[1])) if args else (3, 0.1)
        return CorpusEntry(name, normalize_volume(_perturbed(k, t)))
    if head == "fractal":
        M = int(args[0]) if args else 1
        # finest cells of roughly size h once the union is rescaled to area π
        fine = 1 << max(2 + M, math.ceil(math.log2(1.6 / h)))
        fam = FractalFamily(M=M, cells=fine >> M)
        return CorpusEntry(name, normalize_volume(fractal_build(fam)))
    raise ValueError(f"unknown corpus set {name!r}")


def corpus(names, h: float, n: int = 2) -> list[CorpusEntry]:
    return [make_set(nm, h, n) for nm in parse_names(names)]


def random_grid_set(rng: np.random.Generator, h: float, size: int = 24, fill: float = 0.55,
                    smooth: int = 2) -> GridSet:
    """Random blob: thresholded box-smoothed noise on a size² window, largest values kept."""
    noise = rng.random((size, size))
    for _ in range(smooth):
        noise = (noise + np.roll(noise, 1, 0) + np.roll(noise, -1, 0) + np.roll(noise, 1, 1)
                 + np.roll(noise, -1, 1)) / 5
    k = max(1, int(fill * size * size))
    thr = np.sort(noise.ravel())[-k]
    return GridSet.from_mask(noise >= thr, h)


def random_small_domain(rng: np.random.Generator, N: int, h: float = 1.0) -> GridSet:
    """Connected random domain of N cells grown from the origin (4-neighbour accretion)."""
    cells = {(0, 0)}
    order = [(0, 0)]
    while len(cells) < N:
        x, y = order[int(rng.integers(len(order)))]
        dx, dy = [(1, 0), (-1, 0), (0, 1), (0, -1)][int(rng.integers(4))]
        c = (x + dx, y + dy)
        if c not in cells:
            cells.add(c)
            order.append(c)
    return GridSet(np.array(sorted(cells)), h)
