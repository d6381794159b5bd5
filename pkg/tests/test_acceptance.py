"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line."""

import math

import numpy as np
import pytest

from conftest import record
from fraciso import cli
from fraciso import families as fam
from fraciso.cheeger import (
    cheeger_bruteforce,
    cheeger_gap_check,
    cheeger_heuristic,
    cheeger_scaling_check,
)
from fraciso.corpus import corpus, make_set, random_grid_set, random_small_domain
from fraciso.functionals import fractional_perimeter, interaction, riesz_potential, vs_value
from fraciso.geometry import Ball, GridSet, RadialProfile, rasterize_ball, refine, scale, schwarz_rearrangement
from fraciso.indices import annulus_bound, index_report
from fraciso.minimizer import MinimizeConfig, minimize
from fraciso.reference import analytic_reference
from fraciso.spherical import fuglede_gap, sobolev_sandwich

S_SWEEP = (0.25, 0.5, 0.75, 0.9)


@pytest.fixture(scope="module")
def reports():
    """Index reports on the default corpus at s = 0.5 for h = 1/32 and 1/64."""
    ref = analytic_reference(2, 0.5)
    return {h: {e.name: index_report(e.set, 0.5, e.name, ref) for e in corpus("default", h)}
            for h in (1 / 32, 1 / 64)}


def test_criterion_01_ball_potential():
    worst = 0.0
    for s in S_SWEEP:
        B = rasterize_ball(Ball((0.0, 0.0), 1.0), 1 / 128)
        exact = 2 * math.pi / (2 - s)
        worst = max(worst, abs(riesz_potential(B, (0.0, 0.0), s) / exact - 1))
    ok = worst <= 1e-3
    record(1, ok, f"max rel error of V_s at the centre, h=1/128: {worst:.2e} (tol 1e-3)")
    assert ok


def _doubled(E):
    if isinstance(E, RadialProfile):
        return RadialProfile(2 * (1 + E.samples) - 1, tuple(2 * np.array(E.center)))
    return scale(refine(E, 2), 2.0)


def test_criterion_02_scaling():
    worst = 0.0
    names = ("ellipse", "square", "annulus", "dumbbell", "perturbed:3:0.1")
    for s in S_SWEEP:
        for nm in names:
            E = make_set(nm, 1 / 32).set
            F = _doubled(E)
            k = 2 ** (2 - s)
            worst = max(worst, abs(fractional_perimeter(F, s) / fractional_perimeter(E, s) / k - 1),
                        abs(vs_value(F, s).value / vs_value(E, s).value / k - 1))
    ok = worst <= 1e-2
    record(2, ok, f"max rel deviation from 2^(n-s) over 5 sets x 4 s: {worst:.2e} (tol 1e-2)")
    assert ok


def test_criterion_03_identity(reports):
    worst = max(r.identity_residual() for rs in reports.values() for r in rs.values())
    for s in (0.25, 0.75, 0.9):
        ref = analytic_reference(2, s)
        for e in corpus("default", 1 / 32):
            worst = max(worst, index_report(e.set, s, e.name, ref).identity_residual())
    ok = worst <= 1e-10
    record(3, ok, f"max |beta^2 - delta - zeta| / scale on the corpus: {worst:.2e} (tol 1e-10)")
    assert ok


def test_criterion_04_rearrangement():
    bad, worst = 0, -math.inf
    for s in S_SWEEP:
        rng = np.random.default_rng(2024)
        ref = analytic_reference(2, s)
        for _ in range(50):
            E = random_grid_set(rng, 1 / 16)
            v = vs_value(E, s).value
            vb = ref.potential_ball(schwarz_rearrangement(E).radius)
            worst = max(worst, v / vb - 1)
            bad += v > vb * (1 + 1e-3)
    ok = bad == 0
    record(4, ok, f"violations on 50 random sets x 4 s: {bad}; max V_s(E)/V_s(E*) - 1 = {worst:.2e}")
    assert ok


def test_criterion_05_quantitative(reports):
    min_delta = min(r.delta_s for rs in reports.values() for r in rs.values())
    sups = {}
    for h, rs in reports.items():
        rat = [r.ratios() for nm, r in rs.items() if nm != "ball"]
        sups[h] = (max(x["alpha2_over_delta"] for x in rat), max(x["A2_over_delta"] for x in rat))
    c, f = sups[1 / 32], sups[1 / 64]
    drift = max(abs(f[0] / c[0] - 1), abs(f[1] / c[1] - 1))
    ok = min_delta >= -1e-3 and all(map(math.isfinite, c + f)) and drift <= 0.2
    record(5, ok, f"min delta {min_delta:.2e}; sup alpha^2/delta {c[0]:.3f}->{f[0]:.3f}, "
                  f"sup A^2/delta {c[1]:.3f}->{f[1]:.3f} (drift {drift:.1%}, tol 20%)")
    assert ok


def test_criterion_06_poincare(reports):
    ref = analytic_reference(2, 0.5)
    ratios = [r.ratios()["poincare_ratio"] for nm, r in reports[1 / 64].items() if nm != "ball"]
    holds = []
    for e in corpus("default", 1 / 64):
        holds.append(annulus_bound(e.set, 0.5, ref, rtol=1e-2).holds)
    ok = all(math.isfinite(x) for x in ratios) and max(ratios) < 100 and all(holds)
    record(6, ok, f"max (A+sqrt delta)/beta = {max(ratios):.3f}; annulus bound holds on "
                  f"{sum(holds)}/{len(holds)} sets")
    assert ok


def test_criterion_07_fuglede():
    ts = (0.025, 0.05, 0.1)
    q = [fuglede_gap(RadialProfile.from_function(lambda th: t * np.sin(3 * th), 256), 0.5).gap / t**2
         for t in ts]
    spread = max(q) / min(q) - 1
    sw = sobolev_sandwich(lambda th: np.sin(3 * th), 0.5)
    ok = spread <= 0.15 and 0 < sw.C1 <= sw.C2
    record(7, ok, f"gap/t^2 = {', '.join(f'{x:.3f}' for x in q)} (spread {spread:.1%}, tol 15%); "
                  f"C1={sw.C1:.4g} <= C2={sw.C2:.4g}")
    assert ok


def test_criterion_08_rigidity():
    h = 1 / 48
    worst = {}
    all_conv = True
    for method, inits, res in (("grid_anneal", ("square", "ellipse", "sin3"), h),
                               ("radial_descent", ("sin3", "mixed", "ellipse"), 128)):
        for eps in (0.0, 0.1):
            for seed, init in enumerate(inits):
                cfg = MinimizeConfig(epsilon=eps, s=0.5, method=method, resolution=res, seed=seed, init=init,
                                     iterations=40_000 if method == "grid_anneal" else 200)
                r = minimize(cfg)
                all_conv &= r.converged
                worst[method] = max(worst.get(method, 0.0), r.hausdorff / h)
    ok = all_conv and max(worst.values()) <= 3
    record(8, ok, "max Hausdorff/h (h=1/48): " + ", ".join(f"{k} {v:.2f}" for k, v in worst.items())
           + f"; all converged: {all_conv}")
    assert ok


def test_criterion_09_cheeger_oracle():
    worst = 0.0
    for k in range(20):
        rng = np.random.default_rng(900 + k)
        D = random_small_domain(rng, int(rng.integers(8, 23)), h=0.1)
        m = float(rng.choice([0.85, 1.0]))
        b = cheeger_bruteforce(D, m, 0.5)
        worst = max(worst, abs(cheeger_heuristic(D, m, 0.5, seed=k).value / b.value - 1))
    disk4 = GridSet.from_mask(np.array([[0, 1, 1, 0], [1, 1, 1, 1], [1, 1, 1, 1], [0, 1, 1, 0]], bool), 0.25)
    calib = cheeger_bruteforce(disk4, 1.0, 0.5).calibrable
    cover = cheeger_heuristic(rasterize_ball(Ball((0.0, 0.0), 1.0), 1 / 32), 1.0, 0.5).coverage
    scal = [abs(cheeger_scaling_check(disk4, m, 0.5, 2.0) - 1) for m in (1.0, 0.85)]
    ok = worst <= 1e-8 and calib and cover >= 0.99 and max(scal) <= 0.02
    record(9, ok, f"heuristic vs brute force max rel {worst:.1e} on 20 domains; 4x4 disk calibrable {calib}; "
                  f"h=1/32 disk coverage {cover:.3f}; scaling exponent error {max(scal):.2e}")
    assert ok


def test_criterion_10_cheeger_stability():
    ref = analytic_reference(2, 0.5)
    kappas, est_ok = [], True
    for m in (1.0, 0.85):
        for e in corpus("default", 1 / 32):
            if e.is_ball:
                continue
            g = cheeger_gap_check(e.set, m, 0.5, ref=ref)
            kappas.append(g.kappa_implied)
            est_ok &= g.first_holds and g.second_holds
    ok = min(kappas) > 0 and est_ok
    record(10, ok, f"min implied kappa {min(kappas):.3f} over {len(kappas)} (domain, m) pairs; "
                   f"volume and deficit estimates hold: {est_ok}")
    assert ok


def test_criterion_11_counterexamples():
    s, m = 0.5, 0.85
    growth = fam.oscillating_growth_study(0.1, s, [4, 8, 16])
    P = [g.P_s for g in growth]
    rat = [g.ratio for g in growth]
    osc_ok = P[0] < P[1] < P[2] and max(rat) / min(rat) <= 4
    fail = fam.cheeger_vs_beta_failure(0.1, s, m, [4, 8, 16])
    cheeger_ok = all(f.h_ball <= f.h_value <= f.h_upper_bound * (1 + 1e-12) for f in fail)
    b2 = [f.beta2 for f in fail]
    gr = [f.ratio for f in fail]
    cheeger_ok &= b2[0] < b2[1] < b2[2] and gr[0] > gr[1] > gr[2]
    F = fam.FractalFamily(M=3)
    T0, S0 = fam.fractal_witness(F)
    PsT0, L = fractional_perimeter(T0, s), interaction(T0, S0, s)
    bracket_ok = True
    for M in (1, 2, 3):
        PM = fractional_perimeter(fam.fractal_build(F, M), s)
        up, lo = fam.fractal_series_bounds(F.a, F.b, F.sigma, s, M, PsT0, L)
        bracket_ok &= lo * 0.95 <= PM <= up * 1.05
    dich_ok = True
    for sv in (0.2, 0.3, F.sigma, 0.5, 0.9):
        finite = math.isfinite(fam.fractal_series_limit(F.a, F.b, F.sigma, sv, PsT0))
        dich_ok &= finite == (sv < F.sigma)
    # at s = sigma the lower bound grows by exactly the same amount each generation
    lows = [fam.fractal_series_bounds(F.a, F.b, F.sigma, F.sigma, M, PsT0, L)[1] for M in range(6)]
    steps = np.diff(lows)
    dich_ok &= bool(np.allclose(steps, steps[0], rtol=1e-12, atol=0))
    ok = osc_ok and cheeger_ok and bracket_ok and dich_ok
    record(11, ok, f"P_s {', '.join(f'{x:.2f}' for x in P)}; P_s/j^s band {max(rat) / min(rat):.2f}; "
                   f"gap/beta^2 {', '.join(f'{x:.3f}' for x in gr)}; fractal bracket {bracket_ok}; "
                   f"dichotomy {dich_ok}")
    assert ok


def test_criterion_12_determinism(tmp_path):
    cache = tmp_path / "cache.json"
    assert cli.main(["cache", "--s", "0.5", "--h", "1/32", "--mc-samples", "200000", "--out", str(cache)]) == 0
    commands = {
        "indices": ["indices", "--corpus", "square,oscillating:4:0.1", "--h", "1/32"],
        "verify": ["verify", "--corpus", "ball,dumbbell", "--h", "1/32", "--cache", str(cache),
                   "--studies", "cheeger,rearrangement"],
        "minimize": ["minimize", "--method", "grid_anneal", "--resolution", "1/24", "--iterations", "3000",
                     "--seed", "5"],
        "cheeger": ["cheeger", "--domain", "random:20:4,square", "--seed", "1"],
        "family_osc": ["family", "oscillating", "--j-list", "4", "8"],
        "family_frac": ["family", "fractal", "--M", "2"],
    }
    same = {}
    for key, argv in commands.items():
        blobs = []
        for run in range(2):
            out = tmp_path / f"{key}_{run}.csv"
            cli.main(argv + ["--out", str(out)])
            blobs.append(out.read_bytes())
        same[key] = blobs[0] == blobs[1] and len(blobs[0]) > 0
    plots = []
    for run in range(2):
        paths = cli.emit_plot_data(str(tmp_path / "family_osc_0.csv"), str(tmp_path / f"plots{run}"))
        plots.append([p.read_bytes() for p in paths])
    same["plotdata"] = plots[0] == plots[1] and len(plots[0]) > 0
    ok = all(same.values())
    record(12, ok, "byte-identical reruns: " + ", ".join(f"{k} {v}" for k, v in same.items()))
    assert ok
