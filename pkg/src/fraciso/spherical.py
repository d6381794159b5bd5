"""Nearly spherical planar sets: normalization, seminorms and spectral gaps.

A profile u describes E_u = {ρθ : ρ < 1 + u(θ)}.  Everything here is
evaluated with periodic quadrature on the M nodes of the profile, so
smooth profiles converge spectrally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .functionals import (
    _sine_power_coefficients,
    ball_perimeter,
    fractional_perimeter,
    fsum,
)
from .geometry import RadialProfile, angles, rasterize, rasterize_ball, Ball

SphereProfile = RadialProfile

__all__ = [
    "SphereProfile",
    "profile_barycenter",
    "volume_normalize",
    "barycenter_normalize",
    "normalize",
    "gagliardo_seminorm",
    "gagliardo_seminorm_spectral",
    "l2_norm2",
    "h_function",
    "h_derivative_at_zero",
    "FugledeGap",
    "fuglede_gap",
    "VsGap",
    "vs_gap_bound",
    "SobolevSandwich",
    "sobolev_sandwich",
]


def profile_barycenter(P: RadialProfile) -> np.ndarray:
    """(1/|E|) ∫_E x dx = (1/|E|) ∫ (1+u)^3/3 (cos θ, sin θ) dθ + center."""
    r = 1.0 + P.samples
    th = P.theta
    m = np.array([np.mean(r**3 * np.cos(th)), np.mean(r**3 * np.sin(th))]) * 2 * np.pi / 3
    return m / P.area() + np.array(P.center)


def l2_norm2(P: RadialProfile) -> float:
    """‖u‖²_{L²(∂B_1)}."""
    return float(2 * np.pi * np.mean(P.samples**2))


def volume_normalize(P: RadialProfile, target: float = math.pi) -> RadialProfile:
    """Shift u by a constant so that the enclosed area equals ``target``.

    Solves mean((1 + c + u)^2) = target/π for c with a bracketing root finder.
    """
    u = P.samples
    goal = target / math.pi
    f = lambda c: float(np.mean((1.0 + c + u) ** 2)) - goal
    lo = -1.0 - u.min() + 1e-12
    hi = 1.0
    while f(hi) < 0:
        hi *= 2
        if hi > 1e6:
            raise ValueError("volume normalization is infeasible")
    if f(lo) > 0:
        raise ValueError("volume normalization is infeasible")
    c = optimize.brentq(f, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
    return RadialProfile(u + c, P.center)


def _reparametrize(P: RadialProfile, b: np.ndarray) -> np.ndarray:
    """Radial function about the point ``center + b`` sampled at the nodes."""
    th = P.theta
    w = np.exp(1j * th)
    bz = complex(*b)
    rho = 1.0 + P.evaluate(th) - np.real(np.conj(w) * bz)
    for _ in range(60):
        z = bz + rho * w
        phi = np.angle(z)
        R = 1.0 + P.evaluate(phi)
        F = np.abs(z) - R
        # dF/dρ = Re(w·conj(z))/|z| - R'(φ) Im(w·conj(z))/|z|^2
        dR = _interp_derivative(P, phi)
        zc = w * np.conj(z)
        dF = np.real(zc) / np.abs(z) - dR * np.imag(zc) / np.abs(z) ** 2
        step = F / dF
        rho = rho - step
        if np.max(np.abs(step)) < 1e-15:
            break
    else:
        raise RuntimeError("re-parametrization did not converge")
    return rho


def _interp_derivative(P: RadialProfile, theta: np.ndarray) -> np.ndarray:
    c = P._coef
    k = np.arange(len(c))
    return np.real(np.exp(1j * np.outer(theta, k)) @ (1j * k * c))


def barycenter_normalize(P: RadialProfile, tol: float = 1e-8, maxiter: int = 30) -> RadialProfile:
    """Translate the set so its barycenter sits at the origin and resample."""
    cur = RadialProfile(P.samples)
    for _ in range(maxiter):
        b = profile_barycenter(cur)
        if np.linalg.norm(b) < tol:
            return cur
        rho = _reparametrize(cur, b)
        if np.any(rho <= 0):
            raise RuntimeError("translated set is not star-shaped about its barycenter")
        cur = RadialProfile(rho - 1.0)
    raise RuntimeError("barycenter normalization did not converge")


def normalize(P: RadialProfile) -> RadialProfile:
    """Barycenter at the origin and area π (in that order, then re-checked)."""
    Q = barycenter_normalize(P)
    Q = volume_normalize(Q)
    return barycenter_normalize(Q)


def gagliardo_seminorm(P: RadialProfile, s: float) -> float:
    """[u]² = ∬ |u(x)-u(y)|² / |x-y|^{2+s} over ∂B_1 × ∂B_1 (chord distance).

    Off-diagonal node pairs are summed directly.  Near the diagonal the
    integrand behaves like u'(θ)²|τ|^{-s}; the missing diagonal and the
    resulting O(Δ^{1-s}) error of the punctured sum are removed by the
    local correction -2ζ(s)Δ^{1-s}u'(θ)² per node, with u' the slope of the
    piecewise-linear interpolant.
    """
    u = P.samples
    M = len(u)
    if M < 32:
        raise ValueError("need at least 32 nodes")
    dth = 2 * np.pi / M
    tau = dth * np.arange(1, M)
    kern = np.abs(2 * np.sin(tau / 2)) ** (-(2 + s))
    rows = np.empty(M)
    for j in range(M):
        diff = np.roll(u, -j)[1:] - u[j]
        rows[j] = np.dot(diff * diff, kern)
    slope = (np.roll(u, -1) - np.roll(u, 1)) / (2 * dth)
    corr = -2.0 * special.zeta(s) * dth ** (1 - s) * slope**2
    return fsum(rows * dth * dth) + fsum(corr * dth)


def gagliardo_seminorm_spectral(P: RadialProfile, s: float) -> float:
    """Same seminorm from Fourier multipliers (exact for trigonometric u)."""
    u = P.samples
    M = len(u)
    uh = np.fft.rfft(u) / M
    c = _sine_power_coefficients(M // 2, -1.0 - s / 2)
    mu = 4 * np.pi * (c[0] - c)  # ∫ 2(1 - cos mτ)|2 sin(τ/2)|^{-2-s} dτ
    wts = np.full(len(uh), 2.0)
    wts[0] = 1.0
    wts[-1] = 1.0
    return float(2 * np.pi * np.sum(wts * np.abs(uh) ** 2 * mu))


def h_function(P: RadialProfile, t: float, s: float) -> float:
    """h(t) = ∫_{∂B_1} (1 + t u)^{2-s}; h(0) = 2π."""
    r = 1.0 + t * P.samples
    if np.any(r <= 0):
        raise ValueError("1 + t u must stay positive")
    return float(2 * np.pi * np.mean(r ** (2 - s)))


def h_derivative_at_zero(P: RadialProfile, s: float) -> float:
    """(2 - s) ∫ u, the analytic derivative of h at t = 0."""
    return float((2 - s) * 2 * np.pi * np.mean(P.samples))


@dataclass(frozen=True)
class FugledeGap:
    gap: float
    seminorm2: float
    l2norm2: float
    ratio: float
    method: str
    profile: RadialProfile


def fuglede_gap(P: RadialProfile, s: float, h: float | None = None, method: str = "spectral",
                normalize_first: bool = True) -> FugledeGap:
    """P_s(E_u) - P_s(B_1) with the Fuglede-type comparison quantities.

    ``method="spectral"`` evaluates P_s(E_u) with the boundary identity;
    ``method="grid"`` rasterizes at cell size ``h`` and subtracts the grid
    disk at the same ``h``, so that the staircase bias largely cancels.
    """
    if P.sup_norm > 0.2 + 1e-12:
        raise ValueError("profile too large for a nearly spherical comparison")
    Q = normalize(P) if normalize_first else P
    if method == "spectral":
        gap = fractional_perimeter(Q, s) - ball_perimeter(2, s)
    elif method == "grid":
        if h is None:
            raise ValueError("grid method needs a cell size")
        gap = fractional_perimeter(rasterize(Q, h), s) - fractional_perimeter(
            rasterize_ball(Ball((0.0, 0.0), 1.0), h), s)
    else:
        raise ValueError(f"unknown method {method!r}")
    semi = gagliardo_seminorm(Q, s)
    l2 = l2_norm2(Q)
    denom = semi + s * ball_perimeter(2, s) * l2
    return FugledeGap(gap, semi, l2, gap / denom if denom > 0 else math.nan, method, Q)


@dataclass(frozen=True)
class VsGap:
    gap: float
    l2norm2: float
    ratio: float


def vs_gap_bound(P: RadialProfile, s: float) -> VsGap:
    """(h(0) - h(1))/(2-s): the gap between the origin potentials of B_1 and E_u.

    Since V_s(E_u) is at least the potential at the origin, this bounds
    V_s(B_1) - V_s(E_u) from above.
    """
    gap = (h_function(P, 0.0, s) - h_function(P, 1.0, s)) / (2 - s)
    l2 = l2_norm2(P)
    return VsGap(gap, l2, gap / l2 if l2 > 0 else math.nan)


@dataclass(frozen=True)
class SobolevSandwich:
    ts: tuple
    beta2: tuple
    norm2: tuple  # [u]² + ‖u‖²
    C1: float
    C2: float


def sobolev_sandwich(shape, s: float, ts=(0.025, 0.05, 0.1), M: int = 256) -> SobolevSandwich:
    """Empirical C₁ ≤ β_s²(E_{tu}) / ([tu]² + ‖tu‖²) ≤ C₂ over the amplitudes ``ts``.

    ``shape`` maps angles to u(θ).  Each profile t·u is normalized
    (barycenter and area π) before evaluation.
    """
    from .indices import evaluate

    u = np.asarray(shape(angles(M)), float)
    b2, nn = [], []
    for t in ts:
        Q = normalize(RadialProfile(t * u))
        b2.append(evaluate(Q, s).beta2)
        nn.append(gagliardo_seminorm(Q, s) + l2_norm2(Q))
    r = [b / q for b, q in zip(b2, nn)]
    return SobolevSandwich(tuple(ts), tuple(b2), tuple(nn), min(r), max(r))
