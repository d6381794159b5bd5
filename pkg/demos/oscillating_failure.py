"""Oscillating sets: the s-perimeter grows with the frequency j while the
Cheeger gap stays pinned between two ball values, so gap/β² collapses.

    python3 demos/oscillating_failure.py [s] [m]
"""

import sys

from fraciso.families import cheeger_vs_beta_failure, oscillating_growth_study

s = float(sys.argv[1]) if len(sys.argv) > 1 else 0.5
m = float(sys.argv[2]) if len(sys.argv) > 2 else 0.85
eps, js = 0.1, [2, 4, 8, 16, 32]

print(f"s = {s}, m = {m}, eps = {eps}")
print(f"{'j':>4} {'P_s':>10} {'P_s/j^s':>10} {'pair bound':>11} {'gap':>9} {'beta^2':>9} {'gap/beta^2':>11}  competitor")
for g, f in zip(oscillating_growth_study(eps, s, js), cheeger_vs_beta_failure(eps, s, m, js)):
    print(f"{g.j:4d} {g.P_s:10.3f} {g.ratio:10.3f} {g.pair_bound:11.4f} {f.gap:9.4f} {f.beta2:9.4f} "
          f"{f.ratio:11.4f}  {f.competitor}")
