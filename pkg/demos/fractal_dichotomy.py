"""Fractal unions: closed-form series bounds for P_s(Ω_M) against the grid
value, and the finite/infinite limit on either side of σ.

    python3 demos/fractal_dichotomy.py
"""

import numpy as np

from fraciso.families import FractalFamily, fractal_build, fractal_series_bounds, fractal_series_limit, fractal_witness
from fraciso.functionals import fractional_perimeter, interaction

fam = FractalFamily(M=3)
print(f"a={fam.a} b={fam.b} sigma={fam.sigma:.4f} lambda={fam.lam:g}")
T0, S0 = fractal_witness(fam)

for s in (0.3, 0.5, 0.9):
    P0, L0 = fractional_perimeter(T0, s), interaction(T0, S0, s)
    lim = fractal_series_limit(fam.a, fam.b, fam.sigma, s, P0)
    print(f"\ns = {s}  (s {'<' if s < fam.sigma else '>='} sigma)  upper-bound limit = {lim:.4g}")
    print(f"{'M':>3} {'lower':>9} {'P_s grid':>9} {'upper':>9}")
    for M in range(4):
        up, lo = fractal_series_bounds(fam.a, fam.b, fam.sigma, s, M, P0, L0)
        P = fractional_perimeter(fractal_build(fam, M), s)
        print(f"{M:3d} {lo:9.3f} {P:9.3f} {up:9.3f}")

print("\nupper bound at s = sigma grows linearly:")
P0 = fractional_perimeter(T0, fam.sigma)
print(np.round([fractal_series_bounds(1, 3, fam.sigma, fam.sigma, M, P0, 1.0)[0] for M in range(0, 50, 10)], 3))
