"""Minimize P_s + εV_s at fixed volume from non-round starts and report how
far the result is from a ball.

    python3 demos/rigidity.py [epsilon]
"""

import sys

from fraciso.minimizer import MinimizeConfig, minimize

eps = float(sys.argv[1]) if len(sys.argv) > 1 else 0.1
h = 1 / 48
runs = [("radial_descent", init, 128, 200) for init in ("sin3", "mixed", "ellipse")]
runs += [("grid_anneal", init, h, 40_000) for init in ("square", "ellipse", "sin3")]
for seed, (method, init, res, iters) in enumerate(runs):
    r = minimize(MinimizeConfig(epsilon=eps, method=method, resolution=res, iterations=iters, init=init, seed=seed))
    print(f"{method:15s} {init:8s} energy {r.energy:.5f} (ball {r.ball_energy:.5f})  "
          f"hausdorff/h {r.hausdorff / h:.2f}  converged {r.converged}")
