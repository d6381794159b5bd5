"""Fractional isoperimetry on grids and nearly spherical sets.

Exact grid s-perimeters and Riesz potentials, the indices α, δ_s, ζ_s,
β_s and A_s, minimization of P_s + εV_s, fractional Cheeger constants and
the oscillating and fractal families.
"""

from .geometry import Ball, GridSet, RadialProfile, rasterize, rasterize_ball, unit_ball_volume
from .functionals import fractional_perimeter, interaction, riesz_potential, vs_value
from .reference import BallReference, analytic_reference, build_reference, load_cache, save_cache
from .indices import beta, deficit, evaluate, fraenkel_asymmetry, index_report, strong_asymmetry, zeta
from .spherical import fuglede_gap, gagliardo_seminorm, normalize
from .minimizer import MinimizeConfig, minimize
from .cheeger import cheeger_bruteforce, cheeger_gap_check, cheeger_heuristic
from .families import FractalFamily, fractal_build, oscillating_set

__version__ = "0.1.0"

__all__ = [
    "Ball", "GridSet", "RadialProfile", "rasterize", "rasterize_ball", "unit_ball_volume",
    "fractional_perimeter", "interaction", "riesz_potential", "vs_value",
    "BallReference", "analytic_reference", "build_reference", "load_cache", "save_cache",
    "beta", "deficit", "evaluate", "fraenkel_asymmetry", "index_report", "strong_asymmetry", "zeta",
    "fuglede_gap", "gagliardo_seminorm", "normalize",
    "MinimizeConfig", "minimize",
    "cheeger_bruteforce", "cheeger_gap_check", "cheeger_heuristic",
    "FractalFamily", "fractal_build", "oscillating_set",
]
