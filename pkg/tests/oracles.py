"""Independent reference computations used by the tests.

Each oracle follows a different route from the package: covariogram
integrals in polar coordinates with adaptive 1-D quadrature.
"""

import math

from scipy import integrate


def rectangle_perimeter(a: float, b: float, s: float) -> float:
    """P_s of an a×b rectangle from its covariogram g(z) = (a-|z1|)_+ (b-|z2|)_+.

    P_s = ∫ (ab - g(z)) |z|^{-2-s} dz; the radial integral is closed form.
    """

    def radial(t):
        c, d = math.cos(t), math.sin(t)
        R = min(a / c if c > 0 else math.inf, b / d if d > 0 else math.inf)
        # ab - (a - rc)(b - rd) = r(ad + bc) - r² cd  for r < R
        near = (a * d + b * c) * R ** (1 - s) / (1 - s) - c * d * R ** (2 - s) / (2 - s)
        far = a * b * R ** (-s) / s
        return near + far

    val, _ = integrate.quad(radial, 0, math.pi / 2, epsabs=0, epsrel=1e-13, limit=200,
                            points=[math.atan2(b, a)])
    return 4 * val


def disk_perimeter(s: float, R: float = 1.0) -> float:
    """P_s(B_R) in the plane from the disk covariogram g.

    P_s = 2π ∫_0^∞ (|B_R| - g(r)) r^{-1-s} dr with
    |B_R| - g(d) = 2R² asin(d/2R) + (d/2)(4R² - d²)^{1/2} for d < 2R.
    """
    area = math.pi * R * R

    def deficit_over_r(r):  # (|B_R| - g(r))/r, smooth at r = 0
        if r == 0:
            return 2 * R
        return (2 * R * R * math.asin(r / (2 * R)) + 0.5 * r * math.sqrt(max(4 * R * R - r * r, 0.0))) / r

    near, _ = integrate.quad(deficit_over_r, 0, R, weight="alg", wvar=(-s, 0), epsabs=0, epsrel=1e-13)
    # square-root endpoint at 2R: substitute r = 2R - u²
    far, _ = integrate.quad(lambda u: 2 * u * deficit_over_r(2 * R - u * u) * (2 * R - u * u) ** (-s),
                            0, math.sqrt(R), epsabs=0, epsrel=1e-13)
    tail = area * (2 * R) ** (-s) / s
    return 2 * math.pi * (near + far + tail)


def square_center_potential(s: float, side: float = 1.0) -> float:
    """∫_Q |x - c|^{-s} dx for the centre c of a square, in polar coordinates."""
    half = side / 2
    f = lambda t: (half / math.cos(t)) ** (2 - s) / (2 - s)
    val, _ = integrate.quad(f, 0, math.pi / 4, epsabs=0, epsrel=1e-13)
    return 8 * val


def ellipse_disk_overlap(a: float, b: float) -> float:
    """|E ∩ B_1| for the centred ellipse with semi-axes a, b."""

    def rho2(t):
        return 1.0 / ((math.cos(t) / a) ** 2 + (math.sin(t) / b) ** 2)

    f = lambda t: 0.5 * min(rho2(t), 1.0)
    val, _ = integrate.quad(f, 0, math.pi / 2, epsabs=0, epsrel=1e-12, limit=200)
    return 4 * val


def cosine_seminorm(k: int, s: float) -> float:
    """[cos kθ]² on the unit circle with chord distance.

    Averaging over θ at fixed lag τ gives 2π(1 - cos kτ), so
    [u]² = 4π ∫_0^π 2 sin²(kτ/2) (2 sin(τ/2))^{-2-s} dτ.
    """

    def f(t):  # times τ^{-s} via the weight
        if t == 0:
            return k * k / 2
        return 2 * math.sin(k * t / 2) ** 2 * (2 * math.sin(t / 2)) ** (-2 - s) * t**s

    val, _ = integrate.quad(f, 0, math.pi, weight="alg", wvar=(-s, 0), epsabs=0, epsrel=1e-12, limit=400)
    return 4 * math.pi * val
