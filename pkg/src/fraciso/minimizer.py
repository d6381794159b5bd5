"""Minimization of P_s + εV_s at fixed volume, and the ball-rigidity sweep.

Two searches are provided.

``grid_anneal``
    Metropolis annealing over grid sets in a fixed window.  Moves are
    single-cell flips on the boundary and volume-neutral swaps (one
    boundary cell out, one exterior boundary cell in).  The pair field
    φ = K * χ and the Riesz potential field U = W * χ are updated in place
    after each accepted move, so a proposal costs O(1) for P_s and one pass
    over the window for the V_s term.  During the search V_s is the lattice
    maximum of U; final results are re-evaluated with the continuous
    maximization of :func:`vs_value`.

``radial_descent``
    Gradient descent on the Fourier coefficients (modes k ≥ 2) of a star
    shaped planar profile with finite-difference gradients, Armijo
    backtracking and exact volume renormalization after every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import ndimage
from scipy.signal import fftconvolve

from .functionals import (
    ball_perimeter,
    ball_potential,
    fractional_perimeter,
    riesz_potential,
    vs_value,
)
from .geometry import (
    Ball,
    GridSet,
    RadialProfile,
    angles,
    barycenter,
    from_indicator,
    hausdorff_distance_to_ball,
    rasterize,
    rasterize_ball,
    unit_ball_volume,
)
from .kernels import (
    KernelParams,
    pair_kernel_orthant,
    potential_kernel_orthant,
    symmetric_from_orthant,
    unit_cell_perimeter,
)
from .spherical import barycenter_normalize, volume_normalize

__all__ = [
    "energy",
    "penalized_energy",
    "MinimizeConfig",
    "MinimizeResult",
    "minimize",
    "GridAnnealer",
    "rigidity_sweep",
    "SweepRow",
    "default_lambda",
    "threshold_smooth",
    "ball_competitor",
]


def energy(E, epsilon: float, s: float) -> float:
    """E_s(E) = P_s(E) + ε V_s(E)."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    P = fractional_perimeter(E, s)
    if epsilon == 0:
        return P
    return P + epsilon * vs_value(E, s).value


def penalized_energy(E, epsilon: float, lam: float, s: float, target: float | None = None) -> float:
    """E_s(E) + Λ | |E| - target |, target defaulting to ω_n."""
    target = unit_ball_volume(E.n) if target is None else target
    return energy(E, epsilon, s) + lam * abs(float(E.volume) - target)


def default_lambda(n: int, s: float, epsilon: float) -> float:
    return 10.0 * (ball_perimeter(n, s) + epsilon * ball_potential(n, s)) / unit_ball_volume(n)


@dataclass(frozen=True)
class MinimizeConfig:
    epsilon: float = 0.0
    s: float = 0.5
    n: int = 2
    method: str = "grid_anneal"
    resolution: float = 1 / 48  # cell size h (grid_anneal) or node count M (radial_descent)
    iterations: int = 40_000
    seed: int = 0
    lambda_penalty: float | None = None
    init: str = "square"
    init_amplitude: float = 0.2
    modes: int = 12
    checkpoint_every: int = 1000
    t0_factor: float = 0.1
    cooling: float = 0.95
    smoothing: bool = True

    def __post_init__(self):
        KernelParams(self.n, self.s)
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.method not in ("grid_anneal", "radial_descent"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "radial_descent" and self.n != 2:
            raise ValueError("radial descent is planar")
        floor = default_lambda(self.n, self.s, self.epsilon)
        if self.lambda_penalty is not None and self.lambda_penalty < floor * (1 - 1e-12):
            raise ValueError(f"lambda_penalty must be at least {floor:.6g}")

    @property
    def lam(self) -> float:
        return default_lambda(self.n, self.s, self.epsilon) if self.lambda_penalty is None else self.lambda_penalty

    @property
    def target(self) -> float:
        return unit_ball_volume(self.n)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MinimizeResult:
    final: object
    trace: list
    volume_error: float
    hausdorff: float
    converged: bool
    energy: float
    ball_energy: float
    config: MinimizeConfig
    checkpoint_error: float = 0.0
    iterates: list = field(default_factory=list)  # (δ_s, ζ_s) along the run

    def to_dict(self, max_trace: int = 200) -> dict:
        step = max(1, len(self.trace) // max_trace)
        return {
            "config": self.config.to_dict(),
            "energy": self.energy,
            "ball_energy": self.ball_energy,
            "volume_error": self.volume_error,
            "hausdorff": self.hausdorff,
            "converged": self.converged,
            "checkpoint_error": self.checkpoint_error,
            "trace": [float(v) for v in self.trace[::step]],
            "final": self.final.to_dict(),
        }


# ---------------------------------------------------------------------------
# grid annealing
# ---------------------------------------------------------------------------

class _Pool:
    """Indexable set of flat indices with O(1) insert, remove and random pick."""

    def __init__(self, items=()):
        self.items: list[int] = []
        self.pos: dict[int, int] = {}
        for i in items:
            self.add(int(i))

    def add(self, i: int):
        if i not in self.pos:
            self.pos[i] = len(self.items)
            self.items.append(i)

    def discard(self, i: int):
        p = self.pos.pop(i, None)
        if p is None:
            return
        last = self.items.pop()
        if p < len(self.items):
            self.items[p] = last
            self.pos[last] = p

    def pick(self, rng) -> int:
        return self.items[int(rng.integers(len(self.items)))]

    def __len__(self):
        return len(self.items)


def _initial_set(cfg: MinimizeConfig, h: float) -> GridSet:
    n = cfg.n
    w = unit_ball_volume(n)
    if cfg.init == "square":
        a = w ** (1 / n) / 2
        return from_indicator(lambda p: np.all(np.abs(p) < a, axis=1), (-a,) * n, (a,) * n, h)
    if cfg.init == "ellipse":
        ax = np.ones(n)
        ax[0] = 1.5
        ax /= np.prod(ax) ** (1 / n)
        return from_indicator(lambda p: np.sum((p / ax) ** 2, axis=1) < 1, -ax, ax, h)
    if cfg.init == "ball":
        return rasterize_ball(Ball((0.0,) * n, 1.0), h)
    if cfg.init.startswith("sin") and n == 2:
        k = int(cfg.init[3:] or 3)
        P = volume_normalize(RadialProfile(cfg.init_amplitude * np.sin(k * angles(256))))
        return rasterize(P, h)
    raise ValueError(f"unknown initial set {cfg.init!r}")


class GridAnnealer:
    """Annealing state on a fixed window with incremental field updates.

    Energies are in physical units: P = h^{n-s}(N P_s(C) - Σ φ_i χ_i),
    V = max U over the window lattice, penalty Λ|N h^n - target|.
    """

    def __init__(self, E: GridSet, cfg: MinimizeConfig, window_radius: float = 1.75):
        self.cfg = cfg
        self.n, self.s, self.h = E.n, cfg.s, E.h
        self.eps, self.lam, self.target = cfg.epsilon, cfg.lam, cfg.target
        half = int(math.ceil(window_radius / self.h))
        self.lo = np.full(self.n, -half, dtype=np.int64)
        self.shape = (2 * half,) * self.n
        idx = E.cells - self.lo
        if np.any(idx < 1) or np.any(idx >= np.array(self.shape) - 1):
            raise ValueError("initial set does not fit in the annealing window")
        self.chi = np.zeros(self.shape, bool)
        self.chi[tuple(idx.T)] = True
        self.fac = self.h ** (self.n - self.s)
        self.Pc = unit_cell_perimeter(self.n, self.s)
        R = max(self.shape)
        self.Korth = pair_kernel_orthant(self.n, self.s, R)
        K = np.array(symmetric_from_orthant(self.Korth, self.shape))
        K[tuple(e - 1 for e in self.shape)] = 0.0
        self.Kfull = K
        self.Wfull = np.array(symmetric_from_orthant(potential_kernel_orthant(self.n, self.s, R), self.shape))
        self.coords = np.indices(self.shape).reshape(self.n, -1).T
        self.resync()
        self._build_pools()

    # -- fields -------------------------------------------------------------
    def fresh_fields(self):
        x = self.chi.astype(float)
        phi = fftconvolve(x, self.Kfull, mode="same")
        U = fftconvolve(x, self.Wfull, mode="same") * self.fac
        return phi, U

    def resync(self):
        self.phi, self.U = self.fresh_fields()
        self.count = int(self.chi.sum())
        self.pairs = float(self.phi[self.chi].sum())

    def _kernel_window(self, full: np.ndarray, i) -> np.ndarray:
        c = [e - 1 for e in self.shape]
        sl = tuple(slice(c[k] - i[k], c[k] - i[k] + self.shape[k]) for k in range(self.n))
        return full[sl]

    # -- energy -------------------------------------------------------------
    def perimeter(self, count=None, pairs=None) -> float:
        count = self.count if count is None else count
        pairs = self.pairs if pairs is None else pairs
        return self.fac * (count * self.Pc - pairs)

    def total(self, count=None, pairs=None, vmax=None) -> float:
        count = self.count if count is None else count
        vmax = float(self.U.max()) if vmax is None else vmax
        vol = count * self.h**self.n
        return self.perimeter(count, pairs) + self.eps * vmax + self.lam * abs(vol - self.target)

    def from_scratch(self) -> float:
        phi, U = self.fresh_fields()
        cnt = int(self.chi.sum())
        return self.total(cnt, float(phi[self.chi].sum()), float(U.max()))

    # -- boundary pools -------------------------------------------------------
    def _is_inner(self, i) -> bool:
        if not self.chi[i]:
            return False
        return any(not self.chi[j] for j in self._nbrs(i))

    def _is_outer(self, i) -> bool:
        if self.chi[i]:
            return False
        if any(k == 0 or k == e - 1 for k, e in zip(i, self.shape)):
            return False
        return any(self.chi[j] for j in self._nbrs(i))

    def _nbrs(self, i):
        for k in range(self.n):
            for d in (-1, 1):
                j = list(i)
                j[k] += d
                if 0 <= j[k] < self.shape[k]:
                    yield tuple(j)

    def _build_pools(self):
        self.inner, self.outer = _Pool(), _Pool()
        for flat, i in enumerate(map(tuple, self.coords)):
            if self._is_inner(i):
                self.inner.add(flat)
            elif self._is_outer(i):
                self.outer.add(flat)

    def _touch(self, i):
        for j in (i, *self._nbrs(i)):
            f = int(np.ravel_multi_index(j, self.shape))
            self.inner.discard(f)
            self.outer.discard(f)
            if self._is_inner(j):
                self.inner.add(f)
            elif self._is_outer(j):
                self.outer.add(f)

    # -- moves ----------------------------------------------------------------
    def flip(self, i):
        sign = -1.0 if self.chi[i] else 1.0
        self.pairs += 2.0 * sign * self.phi[i]
        self.count += int(sign)
        self.phi += sign * self._kernel_window(self.Kfull, i)
        self.U += sign * self.fac * self._kernel_window(self.Wfull, i)
        self.chi[i] = not self.chi[i]
        self._touch(i)

    def propose_flip(self, i):
        sign = -1.0 if self.chi[i] else 1.0
        cnt, pairs = self.count + int(sign), self.pairs + 2.0 * sign * self.phi[i]
        vmax = None
        if self.eps:
            vmax = float((self.U + sign * self.fac * self._kernel_window(self.Wfull, i)).max())
        return self.total(cnt, pairs, vmax)

    def propose_swap(self, i, j):
        """Remove i (inside), add j (outside)."""
        d = np.abs(np.subtract(i, j))
        kij = float(self.Korth[tuple(d)])
        pairs = self.pairs - 2.0 * self.phi[i] + 2.0 * (self.phi[j] - kij)
        vmax = None
        if self.eps:
            dU = self._kernel_window(self.Wfull, j) - self._kernel_window(self.Wfull, i)
            vmax = float((self.U + self.fac * dU).max())
        return self.total(self.count, pairs, vmax)

    def grid_set(self) -> GridSet:
        return GridSet(np.argwhere(self.chi) + self.lo, self.h, n=self.n)

    # -- driver ---------------------------------------------------------------
    def run(self, iterations: int, rng, swap_prob: float = 0.8):
        cfg = self.cfg
        cur = self.total()
        ball_E = ball_perimeter(self.n, self.s) + self.eps * ball_potential(self.n, self.s)
        T = cfg.t0_factor * ball_E * self.h**self.n / unit_ball_volume(self.n)
        trace, worst, iterates = [cur], 0.0, []
        for it in range(1, iterations + 1):
            if rng.random() < swap_prob and len(self.inner) and len(self.outer):
                i = np.unravel_index(self.inner.pick(rng), self.shape)
                j = np.unravel_index(self.outer.pick(rng), self.shape)
                new = self.propose_swap(i, j)
                if new <= cur or rng.random() < math.exp(-(new - cur) / T):
                    self.flip(i)
                    self.flip(j)
                    cur = new
            else:
                pool = self.inner if rng.random() < 0.5 else self.outer
                if len(pool):
                    i = np.unravel_index(pool.pick(rng), self.shape)
                    if not (self.chi[i] and self.count == 1):
                        new = self.propose_flip(i)
                        if new <= cur or rng.random() < math.exp(-(new - cur) / T):
                            self.flip(i)
                            cur = new
            if it % cfg.checkpoint_every == 0:
                ref = self.from_scratch()
                worst = max(worst, abs(cur - ref) / abs(ref))
                self.resync()
                cur = self.total()
                T *= cfg.cooling
                trace.append(cur)
                iterates.append(self._indices_snapshot())
        return cur, trace, worst, iterates

    def _indices_snapshot(self):
        vol = self.count * self.h**self.n
        r = (vol / unit_ball_volume(self.n)) ** (1 / self.n)
        Pb = ball_perimeter(self.n, self.s) * r ** (self.n - self.s)
        Vb = ball_potential(self.n, self.s, r)
        return ((self.perimeter() - Pb) / Pb, (Vb - float(self.U.max())) / Vb)

    def polish(self, max_rounds: int = 50):
        """Zero-temperature sweeps: accept any improving flip or swap, scanning
        boundary cells in a fixed order, until a sweep makes no change."""
        cur = self.total()
        for _ in range(max_rounds):
            changed = False
            for f in sorted(self.inner.items):
                i = np.unravel_index(f, self.shape)
                if not self.chi[i]:
                    continue
                best, bj = cur, None
                for g in sorted(self.outer.items):
                    j = np.unravel_index(g, self.shape)
                    if max(abs(a - b) for a, b in zip(i, j)) > 3:
                        continue
                    new = self.propose_swap(i, j)
                    if new < best - 1e-13 * abs(best):
                        best, bj = new, j
                if bj is not None:
                    self.flip(i)
                    self.flip(bj)
                    cur = best
                    changed = True
            for pool in (self.inner, self.outer):
                for f in sorted(pool.items):
                    i = np.unravel_index(f, self.shape)
                    if (self.chi[i] and f not in self.inner.pos) or (not self.chi[i] and f not in self.outer.pos):
                        continue
                    new = self.propose_flip(i)
                    if new < cur - 1e-13 * abs(cur):
                        self.flip(i)
                        cur = new
                        changed = True
            if not changed:
                break
        self.resync()
        return self.total()


SMOOTHING_WIDTHS = (24, 16, 12, 8, 6, 4, 3, 2)  # in cells


def threshold_smooth(chi: np.ndarray, count: int, widths=SMOOTHING_WIDTHS, max_steps: int = 400) -> np.ndarray:
    """Volume-preserving threshold dynamics: repeatedly keep the ``count``
    cells where the Gaussian-smoothed indicator is largest.

    Single-cell moves cannot leave lattice-pinned facets, whereas each
    thresholding step moves whole boundary stretches; wide kernels first,
    narrow ones last.  Ties go to the lower flat index.
    """
    chi = chi.copy()
    order_key = np.arange(chi.size)
    for w in widths:
        for _ in range(max_steps):
            f = ndimage.gaussian_filter(chi.astype(float), w, mode="constant").ravel()
            keep = np.lexsort((order_key, -f))[:count]
            new = np.zeros(chi.size, bool)
            new[keep] = True
            new = new.reshape(chi.shape)
            if np.array_equal(new, chi):
                break
            chi = new
    return chi


def ball_competitor(n: int, h: float) -> GridSet:
    """Rasterized centered ball whose volume is closest to ω_n."""
    target = unit_ball_volume(n)
    best = None
    for r in 1.0 + h * np.linspace(-0.5, 0.5, 41):
        B = rasterize_ball(Ball((0.0,) * n, float(r)), h)
        key = (abs(B.volume - target), abs(r - 1.0))
        if best is None or key < best[0]:
            best = (key, B)
    return best[1]


def _grid_anneal(cfg: MinimizeConfig) -> MinimizeResult:
    h = float(cfg.resolution)
    rng = np.random.default_rng(cfg.seed)
    E0 = _initial_set(cfg, h)
    ann = GridAnnealer(E0, cfg)
    trace = [ann.total()]
    if cfg.smoothing:
        ann.chi[...] = threshold_smooth(ann.chi, int(round(cfg.target / h**cfg.n)))
        ann.resync()
        ann._build_pools()
        trace.append(ann.total())
    cur, tr, worst, iterates = ann.run(cfg.iterations, rng)
    trace.extend(tr)
    cur = ann.polish()
    trace.append(cur)
    E = ann.grid_set()
    ball = ball_competitor(cfg.n, h)
    ball_E = GridAnnealer(ball, cfg).total()
    vol_err = abs(E.volume - cfg.target)
    c = barycenter(E)
    hd = hausdorff_distance_to_ball(E, Ball(tuple(c), 1.0))
    converged = vol_err <= max(h**cfg.n, abs(ball.volume - cfg.target)) * (1 + 1e-9) and cur <= ball_E + 1e-6
    return MinimizeResult(E, trace, vol_err, hd, bool(converged), cur, ball_E, cfg, worst, iterates)


# ---------------------------------------------------------------------------
# radial descent
# ---------------------------------------------------------------------------

def _profile_energy(P: RadialProfile, eps: float, s: float) -> float:
    val = fractional_perimeter(P, s)
    if eps:
        val += eps * vs_value(P, s).value
    return val


def _profile_from_coeffs(c: np.ndarray, M: int, K: int) -> RadialProfile:
    th = angles(M)
    k = np.arange(2, K + 2)
    u = np.cos(np.outer(th, k)) @ c[:K] + np.sin(np.outer(th, k)) @ c[K:]
    return volume_normalize(RadialProfile(u))


def _coeffs_from_profile(P: RadialProfile, K: int) -> np.ndarray:
    c = P._coef
    k = np.arange(2, K + 2)
    k = k[k < len(c)]
    out = np.zeros(2 * K)
    out[: len(k)] = c[k].real
    out[K : K + len(k)] = -c[k].imag
    return out


def _initial_profile(cfg: MinimizeConfig, M: int) -> RadialProfile:
    th = angles(M)
    a = cfg.init_amplitude
    if cfg.init.startswith("sin"):
        k = int(cfg.init[3:] or 3)
        return RadialProfile(a * np.sin(k * th))
    if cfg.init == "mixed":
        return RadialProfile(a * (0.6 * np.cos(2 * th) + 0.4 * np.sin(5 * th)))
    if cfg.init == "ellipse":
        return RadialProfile(a * np.cos(2 * th) + 0.5 * a * np.cos(4 * th))
    if cfg.init == "ball":
        return RadialProfile(np.zeros(M))
    raise ValueError(f"unknown initial profile {cfg.init!r}")


def _radial_descent(cfg: MinimizeConfig) -> MinimizeResult:
    M = int(cfg.resolution)
    if M < 32 or M % 2:
        raise ValueError("radial descent needs an even node count M >= 32")
    K = min(cfg.modes, M // 2 - 2)
    s, eps = cfg.s, cfg.epsilon
    c = _coeffs_from_profile(_initial_profile(cfg, M), K)
    P = _profile_from_coeffs(c, M, K)
    f = _profile_energy(P, eps, s)
    trace, iterates = [f], []
    step = 1e-3
    fd = 1e-5 * max(1e-3, float(np.max(np.abs(c))))
    for _ in range(cfg.iterations):
        # envelope rule: dV_s = dU(y*) with the maximizing center y* held fixed
        y_star = vs_value(P, s).center if eps else None

        def frozen(Q):
            val = fractional_perimeter(Q, s)
            return val + eps * riesz_potential(Q, y_star, s) if eps else val

        g = np.empty_like(c)
        for q in range(len(c)):
            e = np.zeros_like(c)
            e[q] = fd
            g[q] = (frozen(_profile_from_coeffs(c + e, M, K)) - frozen(_profile_from_coeffs(c - e, M, K))) / (2 * fd)
        gn = float(np.dot(g, g))
        if gn < 1e-20:
            break
        accepted = False
        while step > 1e-12:
            cn = c - step * g
            Pn = _profile_from_coeffs(cn, M, K)
            fn = _profile_energy(Pn, eps, s)
            if fn <= f - 1e-4 * step * gn:
                c, P, f, accepted = cn, Pn, fn, True
                step *= 2.0
                break
            step *= 0.5
        if not accepted:
            break
        trace.append(f)
        iterates.append(_profile_indices(P, s))
        if np.max(np.abs(c)) < 1e-9:
            break
        fd = 1e-5 * max(1e-3, float(np.max(np.abs(c))))
    P = barycenter_normalize(P)
    vol_err = abs(P.area() - math.pi)
    hd = float(np.max(np.abs(P.samples)))
    ball_E = ball_perimeter(2, s) + eps * ball_potential(2, s)
    h_equiv = 2 * math.pi / M
    converged = vol_err <= 1e-10 and f <= ball_E + 1e-6 + 1e-6 * ball_E
    res = MinimizeResult(P, trace, vol_err, hd, bool(converged), f, ball_E, cfg, 0.0, iterates)
    res.h_equiv = h_equiv
    return res


def _profile_indices(P: RadialProfile, s: float):
    Pb = ball_perimeter(2, s)
    Vb = ball_potential(2, s)
    return ((fractional_perimeter(P, s) - Pb) / Pb, (Vb - vs_value(P, s).value) / Vb)


def minimize(cfg: MinimizeConfig) -> MinimizeResult:
    """Best set found for P_s + εV_s + Λ|vol - ω_n| under ``cfg``."""
    if cfg.method == "grid_anneal":
        return _grid_anneal(cfg)
    return _radial_descent(cfg)


# ---------------------------------------------------------------------------
# rigidity sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    method: str
    runs: int
    max_distance: float
    max_energy_gap: float  # max over runs of E_s(found) - E_s(ball competitor)
    min_delta_over_zeta: float
    all_converged: bool


GRID_INITS = ("square", "ellipse", "sin3")
PROFILE_INITS = ("sin3", "mixed", "ellipse")


def rigidity_sweep(s: float, epsilons, method: str = "radial_descent", resolution=None,
                   iterations: int | None = None, seeds=(0, 1, 2)) -> list[SweepRow]:
    """Minimize from three initial shapes per ε; report the largest distance
    to a ball, the energy excess over the ball competitor and min δ/ζ."""
    rows = []
    inits = GRID_INITS if method == "grid_anneal" else PROFILE_INITS
    if resolution is None:
        resolution = 1 / 48 if method == "grid_anneal" else 128
    if iterations is None:
        iterations = 40_000 if method == "grid_anneal" else 200
    for eps in epsilons:
        dist, gap, dz, ok = 0.0, -math.inf, math.inf, True
        for init, seed in zip(inits, seeds):
            cfg = MinimizeConfig(epsilon=float(eps), s=s, method=method, resolution=resolution,
                                 iterations=iterations, seed=seed, init=init)
            r = minimize(cfg)
            dist = max(dist, r.hausdorff)
            gap = max(gap, r.energy - r.ball_energy)
            ok &= r.converged
            for d, z in r.iterates:
                if z > 1e-12:
                    dz = min(dz, d / z)
        rows.append(SweepRow(float(eps), method, len(inits), dist, gap, dz, bool(ok)))
    return rows
