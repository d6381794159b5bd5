"""Command-line harness: reference cache, corpus indices, verification suite,
minimization, Cheeger constants, family studies and plot data.

Exit codes: 0 all checks pass, 1 some check failed, 2 a resolution or
feasibility flag was raised (and nothing failed).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import cheeger as ch
from . import families as fam
from .corpus import DEFAULT_CORPUS, corpus, make_set, parse_names, random_grid_set, random_small_domain
from .functionals import fractional_perimeter, interaction, vs_value
from .geometry import Ball, RadialProfile, rasterize_ball, refine, scale, schwarz_rearrangement
from .indices import CSV_FIELDS, annulus_bound, index_report
from .minimizer import MinimizeConfig, SweepRow, minimize, rigidity_sweep
from .reference import BallReference, CacheMismatch, analytic_reference, build_reference_cache, load_cache, save_cache
from .spherical import fuglede_gap, sobolev_sandwich

EXIT_PASS, EXIT_FAIL, EXIT_FLAG = 0, 1, 2

TOLERANCES = {
    "quadrature_rel": 1e-2,   # scaling laws and other quadrature-vs-analytic comparisons
    "identity": 1e-10,        # β² - δ - ζ
    "isoperimetric": 1e-3,    # δ_s ≥ -tol
    "rearrangement": 1e-3,    # ζ_s ≥ -tol
    "ball_delta": 0.3,        # |δ_s| of the grid ball ≤ this × h^{1-s} (staircase bias)
    "ball_alpha": 0.02,
    "ratio_cap": 100.0,       # α²/δ, A²/δ, (A+√δ)/β must stay below this
    "annulus_rel": 1e-2,
    "reference": 1e-8,        # cached P_s(B_1) against the closed form
    "max_h": 1 / 32,          # coarser grids raise a resolution flag
    "fuglede_band": 0.15,
    "growth_band": 4.0,
    "bracket_slack": 0.05,
}

REPORT_FIELDS = ["set_id", "s", "check_id", "property", "status", "value", "threshold", "margin", "detail"]


def _num(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.10g}"
    return str(x)


def parse_h(text) -> float:
    """Cell size from '1/64', '0.015625' or a number."""
    if isinstance(text, (int, float)):
        v = float(text)
    else:
        v = float(Fraction(str(text)))
    if not v > 0:
        raise argparse.ArgumentTypeError("h must be positive")
    return v


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    n: int = 2
    s_list: list = field(default_factory=lambda: [0.5])
    h: float = 1 / 64
    corpus: list = field(default_factory=lambda: list(DEFAULT_CORPUS))
    seeds: list = field(default_factory=lambda: [0])
    out: str | None = None
    summary: str | None = None
    cache: str | None = None
    jobs: int = 1
    studies: list = field(default_factory=lambda: ["all"])
    tolerances: dict = field(default_factory=lambda: dict(TOLERANCES))

    def __post_init__(self):
        self.s_list = [float(s) for s in self.s_list]
        if not all(0 < s < 1 for s in self.s_list):
            raise ValueError("every s must lie in (0, 1)")
        self.h = parse_h(self.h)
        if self.out is not None:
            parent = Path(self.out).resolve().parent
            if not parent.is_dir():
                raise ValueError(f"output directory {parent} does not exist")
        unknown = set(self.tolerances) - set(TOLERANCES)
        if unknown:
            raise ValueError(f"unknown tolerance keys: {sorted(unknown)}")
        self.tolerances = {**TOLERANCES, **self.tolerances}

    @classmethod
    def from_sources(cls, args: argparse.Namespace, file_cfg: dict | None = None) -> "RunConfig":
        """Command-line values win over the JSON config, which wins over defaults."""
        data = dict(file_cfg or {})
        names = {f.name for f in fields(cls)}
        for k, v in vars(args).items():
            if k in names and v is not None:
                data[k] = v
        tol = dict(data.get("tolerances", {}))
        for item in getattr(args, "tol", None) or []:
            key, _, val = item.partition("=")
            tol[key] = float(val)
        data["tolerances"] = tol
        data["command"] = args.command
        return cls(**{k: v for k, v in data.items() if k in names})


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------

def write_csv(rows: list[dict], columns: list[str], path: str | None) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: _num(r.get(k)) for k in columns})
    text = buf.getvalue()
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_csv(path: str) -> tuple[list[str], list[dict]]:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.DictReader(fh)
        return list(r.fieldnames or []), list(r)


def _reference(cfg: RunConfig, s: float) -> BallReference:
    if cfg.cache is None:
        raise FileNotFoundError("a reference cache is required (run the 'cache' command first)")
    if not Path(cfg.cache).exists():
        raise FileNotFoundError(f"reference cache {cfg.cache} not found")
    return load_cache(cfg.cache, cfg.n, s, cfg.h)


# ---------------------------------------------------------------------------
# verification suite
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    set_id: str
    s: float
    check_id: str
    property: str
    status: str  # pass | fail | flag
    value: float
    threshold: float
    margin: float
    detail: str = ""

    def row(self) -> dict:
        d = asdict(self)
        d["s"] = f"{self.s:g}" if not math.isnan(self.s) else ""
        return d


def _upper(set_id, s, cid, prop, value, thr, detail=""):
    """value ≤ thr."""
    ok = value <= thr
    return Check(set_id, s, cid, prop, "pass" if ok else "fail", value, thr, thr - value, detail)


def _lower(set_id, s, cid, prop, value, thr, detail=""):
    """value ≥ thr."""
    ok = value >= thr
    return Check(set_id, s, cid, prop, "pass" if ok else "fail", value, thr, value - thr, detail)


def _scaled(E, lam):
    if isinstance(E, RadialProfile):
        return RadialProfile((1.0 + E.samples) * lam - 1.0, tuple(np.array(E.center) * lam))
    # subdivide, then dilate: same cell size, 2^n times as many cells
    return scale(refine(E, int(lam)), lam)


def _set_checks(task) -> list[Check]:
    name, s, h, n, ref_dict, tol = task
    ref = BallReference.from_dict(ref_dict)
    entry = make_set(name, h, n)
    E = entry.set
    out = []
    rep = index_report(E, s, name, ref)
    expo = 2.0 ** (n - s)
    P2 = fractional_perimeter(_scaled(E, 2.0), s)
    out.append(_upper(name, s, "scaling_perimeter", "s-perimeter is homogeneous of degree n-s",
                      abs(P2 / rep.P_s / expo - 1), tol["quadrature_rel"]))
    V2 = vs_value(_scaled(E, 2.0), s).value
    out.append(_upper(name, s, "scaling_potential", "V_s is homogeneous of degree n-s",
                      abs(V2 / rep.V_s / expo - 1), tol["quadrature_rel"]))
    out.append(_upper(name, s, "beta_identity", "beta^2 = delta + zeta",
                      rep.identity_residual(), tol["identity"]))
    neg = any(f.endswith("radicand_negative") for f in rep.flags)
    out.append(Check(name, s, "radicands", "beta and A_s radicands are nonnegative up to clamping",
                     "fail" if neg else "pass", rep.beta2, 0.0, rep.beta2, "|".join(rep.flags)))
    out.append(_lower(name, s, "isoperimetric", "balls minimize the s-perimeter at fixed volume",
                      rep.delta_s, -tol["isoperimetric"]))
    out.append(_lower(name, s, "rearrangement", "V_s(E) <= V_s(E*)", rep.zeta_s, -tol["rearrangement"]))
    ann = annulus_bound(E, s, ref, rtol=tol["annulus_rel"])
    rhs = ann.delta + ann.annulus_term
    out.append(Check(name, s, "annulus_bound", "beta^2 >= delta + annulus term about the V_s-center",
                     "pass" if ann.holds else "fail", ann.beta2, rhs, ann.beta2 - rhs * (1 - tol["annulus_rel"])))
    if entry.is_ball:
        out.append(_upper(name, s, "ball_deficit", "the ball has vanishing deficit up to staircase bias",
                          abs(rep.delta_s), tol["ball_delta"] * h ** (1 - s)))
        out.append(_upper(name, s, "ball_asymmetry", "the ball has vanishing asymmetry",
                          rep.alpha, tol["ball_alpha"]))
    else:
        r = rep.ratios()
        cap = tol["ratio_cap"]
        for key, prop in (("alpha2_over_delta", "alpha^2 <= C delta"), ("A2_over_delta", "A_s^2 <= C delta"),
                          ("poincare_ratio", "(A_s + sqrt(delta)) <= C beta")):
            v = r[key]
            if math.isnan(v):
                out.append(Check(name, s, key, prop, "flag", v, cap, math.nan, "undefined ratio"))
            else:
                out.append(_upper(name, s, key, prop, v, cap))
    return out


def _reference_check(ref: BallReference, tol) -> Check:
    exact = analytic_reference(ref.n, ref.s).P_s_B1
    dev = abs(ref.P_s_B1 / exact - 1)
    return _upper("reference", ref.s, "reference_value", "cached P_s(B_1) equals the closed form",
                  dev, tol["reference"])


def _study_checks(cfg: RunConfig, s: float, ref: BallReference, studies: set) -> list[Check]:
    tol = cfg.tolerances
    out = []
    if {"all", "rearrangement"} & studies:
        rng = np.random.default_rng(cfg.seeds[0])
        worst = -math.inf
        bad = 0
        for _ in range(50):
            E = random_grid_set(rng, 1 / 16)
            v = vs_value(E, s).value
            vb = ref.potential_ball(schwarz_rearrangement(E).radius)
            worst = max(worst, v / vb - 1)
            bad += v > vb * (1 + tol["rearrangement"])
        out.append(_upper("study:random_sets", s, "rearrangement_random",
                          "V_s(E) <= V_s(E*) on 50 random sets", worst, tol["rearrangement"],
                          f"violations={bad}"))
    if {"all", "fuglede"} & studies:
        P = lambda t: RadialProfile.from_function(lambda th: t * np.sin(3 * th), 256)
        gaps = [fuglede_gap(P(t), s) for t in (0.025, 0.05, 0.1)]
        q = [g.gap / t**2 for g, t in zip(gaps, (0.025, 0.05, 0.1))]
        spread = max(q) / min(q) - 1
        out.append(_upper("study:fuglede", s, "fuglede_scaling", "P_s(E_u) - P_s(B_1) ~ t^2",
                          spread, tol["fuglede_band"]))
        sw = sobolev_sandwich(lambda th: np.sin(3 * th), s)
        out.append(_lower("study:fuglede", s, "fuglede_sandwich", "beta^2 comparable to [u]^2 + ||u||^2",
                          sw.C1, 0.0, f"C1={sw.C1:.6g};C2={sw.C2:.6g}"))
    if {"all", "oscillating"} & studies:
        rows = fam.oscillating_growth_study(0.1, s, [4, 8, 16])
        Ps = [r.P_s for r in rows]
        inc = min(b - a for a, b in zip(Ps, Ps[1:]))
        out.append(_lower("study:oscillating", s, "oscillating_increasing", "P_s(Omega_j) increases with j",
                          inc, 0.0))
        rat = [r.ratio for r in rows]
        out.append(_upper("study:oscillating", s, "oscillating_growth_band", "P_s/j^s stays in a bounded band",
                          max(rat) / min(rat), tol["growth_band"]))
    if {"all", "fractal"} & studies:
        F = fam.FractalFamily(M=3)
        T0, S0 = fam.fractal_witness(F)
        PsT0, L = fractional_perimeter(T0, s), interaction(T0, S0, s)
        worst = math.inf
        for M in (1, 2, 3):
            P = fractional_perimeter(fam.fractal_build(F, M), s)
            up, lo = fam.fractal_series_bounds(F.a, F.b, F.sigma, s, M, PsT0, L)
            slack = tol["bracket_slack"]
            worst = min(worst, up * (1 + slack) - P, P - lo * (1 - slack))
        out.append(_lower("study:fractal", s, "fractal_bracket", "series bounds bracket P_s(Omega_M)",
                          worst, 0.0))
        lim = fam.fractal_series_limit(F.a, F.b, F.sigma, s, PsT0)
        finite = math.isfinite(lim)
        ok = finite == (s < F.sigma)
        out.append(Check("study:fractal", s, "fractal_dichotomy", "series limit finite iff s < sigma",
                         "pass" if ok else "fail", lim if finite else math.inf, F.sigma, 0.0 if ok else -1.0))
    if {"all", "cheeger"} & studies:
        rng = np.random.default_rng(cfg.seeds[0])
        worst = 0.0
        for _ in range(5):
            D = random_small_domain(rng, int(rng.integers(8, 17)))
            b = ch.cheeger_bruteforce(D, min(1.0, (2 - s) / 2 + 0.1), s)
            hh = ch.cheeger_heuristic(D, b.m, s, seed=cfg.seeds[0])
            worst = max(worst, abs(hh.value / b.value - 1))
        out.append(_upper("study:cheeger", s, "cheeger_oracle", "heuristic matches exhaustive search",
                          worst, 1e-8))
    return out


def run_verification_suite(cfg: RunConfig) -> list[Check]:
    names = parse_names(cfg.corpus)
    studies = set(cfg.studies)
    checks: list[Check] = []
    tasks = []
    refs = {}
    for s in cfg.s_list:
        ref = _reference(cfg, s)
        refs[s] = ref
        checks.append(_reference_check(ref, cfg.tolerances))
        tasks += [(nm, s, cfg.h, cfg.n, ref.to_dict(), cfg.tolerances) for nm in names]
    if cfg.h > cfg.tolerances["max_h"]:
        checks.append(Check("run", math.nan, "resolution", "grid fine enough for quadrature tolerances",
                            "flag", cfg.h, cfg.tolerances["max_h"], cfg.tolerances["max_h"] - cfg.h,
                            "under-resolved"))
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as ex:
            for res in ex.map(_set_checks, tasks):
                checks.extend(res)
    else:
        for t in tasks:
            checks.extend(_set_checks(t))
    if cfg.n == 2 and "none" not in studies:
        for s in cfg.s_list:
            checks.extend(_study_checks(cfg, s, refs[s], studies))
    checks.sort(key=lambda c: (c.set_id, c.s if not math.isnan(c.s) else -1.0, c.check_id))
    return checks


def summarize(checks: list[Check]) -> dict:
    worst: dict = {}
    for c in checks:
        if math.isnan(c.margin):
            continue
        worst[c.check_id] = min(worst.get(c.check_id, math.inf), c.margin)
    return {
        "passed": sum(c.status == "pass" for c in checks),
        "failed": sum(c.status == "fail" for c in checks),
        "flagged": sum(c.status == "flag" for c in checks),
        "worst_margins": {k: float(f"{v:.10g}") for k, v in sorted(worst.items())},
    }


def exit_code(statuses) -> int:
    statuses = list(statuses)
    if "fail" in statuses:
        return EXIT_FAIL
    if "flag" in statuses:
        return EXIT_FLAG
    return EXIT_PASS


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_cache(args, file_cfg) -> int:
    cfg = RunConfig.from_sources(args, file_cfg)
    out = cfg.out or cfg.cache or "reference_cache.json"
    refs = build_reference_cache(cfg.n, cfg.s_list, cfg.h, mc_samples=args.mc_samples, seed=cfg.seeds[0])
    save_cache(out, refs)
    for r in refs:
        print(f"n={r.n} s={r.s:g} h={r.h:.6g} P_s(B_1)={r.P_s_B1:.12g} V_s(B_1)={r.V_s_B1:.12g} "
              f"staircase_bias={r.staircase_bias:.4g}")
    return EXIT_PASS


def cmd_indices(args, file_cfg) -> int:
    cfg = RunConfig.from_sources(args, file_cfg)
    rows = []
    for s in cfg.s_list:
        ref = _reference(cfg, s) if cfg.cache else analytic_reference(cfg.n, s, cfg.h)
        for e in corpus(cfg.corpus, cfg.h, cfg.n):
            rows.append(index_report(e.set, s, e.name, ref).csv_row())
    write_csv(rows, CSV_FIELDS, cfg.out)
    return EXIT_FLAG if cfg.h > cfg.tolerances["max_h"] else EXIT_PASS


def cmd_verify(args, file_cfg) -> int:
    cfg = RunConfig.from_sources(args, file_cfg)
    checks = run_verification_suite(cfg)
    write_csv([c.row() for c in checks], REPORT_FIELDS, cfg.out)
    summary = summarize(checks)
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if cfg.summary:
        Path(cfg.summary).write_text(text, encoding="utf-8")
    else:
        sys.stderr.write(text)
    return exit_code(c.status for c in checks)


MINIMIZE_FIELDS = ["epsilon", "s", "method", "init", "seed", "resolution", "iterations", "energy",
                   "ball_energy", "volume_error", "hausdorff", "converged", "checkpoint_error"]
SWEEP_FIELDS = [f.name for f in fields(SweepRow)]


def cmd_minimize(args, file_cfg) -> int:
    s = float(args.s[0]) if args.s else 0.5
    if args.sweep:
        rows = rigidity_sweep(s, args.epsilons, method=args.method, resolution=args.resolution,
                              iterations=args.iterations)
        write_csv([asdict(r) for r in rows], SWEEP_FIELDS, args.out)
        return EXIT_PASS if all(r.all_converged for r in rows) else EXIT_FLAG
    res_default = 1 / 48 if args.method == "grid_anneal" else 128
    res = args.resolution if args.resolution is not None else res_default
    if args.method == "radial_descent":
        res = int(res)
    iters = args.iterations if args.iterations is not None else (40_000 if args.method == "grid_anneal" else 200)
    cfg = MinimizeConfig(epsilon=args.epsilon, s=s, method=args.method, resolution=res, iterations=iters,
                         seed=args.seed, init=args.init)
    r = minimize(cfg)
    row = {"epsilon": cfg.epsilon, "s": cfg.s, "method": cfg.method, "init": cfg.init, "seed": cfg.seed,
           "resolution": cfg.resolution, "iterations": cfg.iterations, "energy": r.energy,
           "ball_energy": r.ball_energy, "volume_error": r.volume_error, "hausdorff": r.hausdorff,
           "converged": r.converged, "checkpoint_error": r.checkpoint_error}
    write_csv([row], MINIMIZE_FIELDS, args.out)
    if args.trace:
        write_csv([{"step": i, "energy": v} for i, v in enumerate(r.trace)], ["step", "energy"], args.trace)
    if args.final:
        Path(args.final).write_text(json.dumps(r.to_dict(), sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_PASS if r.converged else EXIT_FLAG


CHEEGER_FIELDS = ["domain_id", "method", "m", "s", "cells", "h_value", "h_ball", "gap", "zeta", "alpha2",
                  "kappa_implied", "gamma_implied", "subset_volume", "volume_bound", "subset_deficit",
                  "first_holds", "second_holds", "calibrable", "coverage"]


def _cheeger_domain(name: str, h: float):
    head, *a = name.split(":")
    if head == "random":
        N, seed = int(a[0]), int(a[1]) if len(a) > 1 else 0
        return random_small_domain(np.random.default_rng(seed), N)
    if head == "disk":
        R = float(a[0]) if a else 4.0
        return rasterize_ball(Ball((0.0, 0.0), R), 1.0)
    return make_set(name, h).set


def cmd_cheeger(args, file_cfg) -> int:
    rows, statuses = [], []
    s_list = [float(s) for s in (args.s or [0.5])]
    for s in s_list:
        for name in parse_names(args.domain):
            D = _cheeger_domain(name, parse_h(args.h))
            if isinstance(D, RadialProfile):
                res = ch.cheeger_profile_upper(D, args.m, s)
            else:
                res = ch._solver(D, args.method)(D, args.m, s, args.seed)
            g = ch.cheeger_gap_check(D, args.m, s, result=res, seed=args.seed)
            hB = res.value / (1 + g.gap)
            rows.append({"domain_id": name, "method": res.method, "m": args.m, "s": s,
                         "cells": "" if isinstance(D, RadialProfile) else len(D), "h_value": res.value,
                         "h_ball": hB, "gap": g.gap, "zeta": g.zeta, "alpha2": g.alpha2,
                         "kappa_implied": g.kappa_implied, "gamma_implied": g.gamma_implied,
                         "subset_volume": g.subset_volume, "volume_bound": g.volume_bound,
                         "subset_deficit": g.subset_deficit, "first_holds": g.first_holds,
                         "second_holds": g.second_holds, "calibrable": res.calibrable,
                         "coverage": res.coverage})
            statuses.append("pass" if g.first_holds and g.second_holds and g.gap >= -1e-9 else "fail")
    write_csv(rows, CHEEGER_FIELDS, args.out)
    return exit_code(statuses)


OSC_FIELDS = ["j", "P_s", "P_s_over_j_s", "pair_bound", "P_s_grid", "h_value", "h_ball", "h_upper_bound",
              "gap", "beta2", "delta", "gap_over_beta2", "competitor"]
FRACTAL_FIELDS = ["M", "volume", "P_s", "upper", "lower", "series_limit", "h_value", "h_ball_c0",
                  "h_ball_M", "h_ball_inf", "gap", "beta2", "delta", "delta_inf", "gap_over_beta2", "competitor"]


def _strictly(seq, decreasing=False) -> bool:
    pairs = list(zip(seq, seq[1:]))
    return all((b < a) if decreasing else (b > a) for a, b in pairs)


def cmd_family(args, file_cfg) -> int:
    s = float(args.s)
    if args.kind == "oscillating":
        h = parse_h(args.h) if args.h else None
        try:
            growth = fam.oscillating_growth_study(args.epsilon, s, args.j_list, h)
        except fam.UnderResolved as exc:
            print(f"under-resolved: {exc}", file=sys.stderr)
            return EXIT_FLAG
        fail = {r.j: None for r in growth}
        if not args.no_cheeger:
            fail = {r.j: r for r in fam.cheeger_vs_beta_failure(args.epsilon, s, args.m, args.j_list)}
        rows = []
        for g in growth:
            f = fail[g.j]
            row = {"j": g.j, "P_s": g.P_s, "P_s_over_j_s": g.ratio, "pair_bound": g.pair_bound,
                   "P_s_grid": g.P_s_grid}
            if f is not None:
                row.update({"h_value": f.h_value, "h_ball": f.h_ball, "h_upper_bound": f.h_upper_bound,
                            "gap": f.gap, "beta2": f.beta2, "delta": f.delta, "gap_over_beta2": f.ratio,
                            "competitor": f.competitor})
            rows.append(row)
        write_csv(rows, OSC_FIELDS, args.out)
        ok = _strictly([g.P_s for g in growth])
        rat = [g.ratio for g in growth]
        ok &= max(rat) / min(rat) <= TOLERANCES["growth_band"]
        if not args.no_cheeger:
            fr = list(fail.values())
            ok &= all(f.h_value <= f.h_upper_bound * (1 + 1e-12) and f.h_value >= f.h_ball for f in fr)
            ok &= _strictly([f.ratio for f in fr], decreasing=True)
        return EXIT_PASS if ok else EXIT_FAIL
    F = fam.FractalFamily(a=args.a, b=args.b, sigma=args.sigma, M=args.M, cells=args.cells)
    rows_ = fam.fractal_failure_demo(F, s, args.m, seed=args.seed)
    T0, _ = fam.fractal_witness(F)
    lim = fam.fractal_series_limit(F.a, F.b, F.sigma, s, fractional_perimeter(T0, s))
    rows = [{"M": r.M, "volume": r.volume, "P_s": r.P_s, "upper": r.upper, "lower": r.lower,
             "series_limit": lim if math.isfinite(lim) else "inf", "h_value": r.h_value,
             "h_ball_c0": r.h_ball_c0, "h_ball_M": r.h_ball_M, "h_ball_inf": r.h_ball_inf, "gap": r.gap,
             "beta2": r.beta2, "delta": r.delta, "delta_inf": r.delta_inf, "gap_over_beta2": r.ratio,
             "competitor": r.competitor} for r in rows_]
    write_csv(rows, FRACTAL_FIELDS, args.out)
    slack = TOLERANCES["bracket_slack"]
    ok = all(r.lower * (1 - slack) <= r.P_s <= r.upper * (1 + slack) for r in rows_)
    ok &= all(r.h_ball_inf <= r.h_ball_M <= r.h_value <= r.h_ball_c0 * (1 + 1e-12) for r in rows_)
    if s >= F.sigma:
        ok &= _strictly([r.beta2 for r in rows_])
        ok &= _strictly([r.ratio for r in rows_], decreasing=True)
    return EXIT_PASS if ok else EXIT_FAIL


PLOT_PAIRS = [
    ("j", "P_s"), ("j", "P_s_over_j_s"), ("j", "gap_over_beta2"), ("j", "beta2"),
    ("M", "P_s"), ("M", "beta2"), ("M", "gap"), ("M", "gap_over_beta2"),
    ("epsilon", "max_distance"), ("epsilon", "hausdorff"), ("step", "energy"),
]


def emit_plot_data(report: str, outdir: str) -> list[Path]:
    """Two-column data files for every recognized (x, y) column pair."""
    cols, rows = read_csv(report)
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(report).stem
    written = []
    for x, y in PLOT_PAIRS:
        if x not in cols or y not in cols:
            continue
        pts = [(float(r[x]), r[y]) for r in rows if r[x] != "" and r[y] != ""]
        pts.sort(key=lambda p: p[0])
        path = out / f"{stem}__{x}_vs_{y}.dat"
        lines = [f"# {x} {y}"] + [f"{_num(px)} {py}" for px, py in pts]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)
    return written


def cmd_plotdata(args, file_cfg) -> int:
    for p in emit_plot_data(args.report, args.outdir):
        print(p)
    return EXIT_PASS


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _common(p, corpus_opts=True):
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--s", dest="s_list", type=float, nargs="+", default=None)
    p.add_argument("--h", type=parse_h, default=None)
    p.add_argument("--cache", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--seeds", type=int, nargs="+", default=None)
    p.add_argument("--tol", action="append", metavar="KEY=VALUE", help="override a tolerance")
    if corpus_opts:
        p.add_argument("--corpus", type=parse_names, default=None,
                       help="comma-separated names; 'default' is the full corpus")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fraciso", description=__doc__.splitlines()[0])
    p.add_argument("--config", default=None, help="JSON file of option defaults")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cache", help="build the P_s(B_1), V_s(B_1) reference cache")
    _common(c, corpus_opts=False)
    c.add_argument("--mc-samples", type=int, default=2_000_000)
    c.set_defaults(func=cmd_cache)

    c = sub.add_parser("indices", help="α, δ_s, ζ_s, β_s and A_s on the corpus")
    _common(c)
    c.set_defaults(func=cmd_indices)

    c = sub.add_parser("verify", help="run the verification suite")
    _common(c)
    c.add_argument("--summary", default=None, help="JSON summary path (stderr if omitted)")
    c.add_argument("--jobs", type=int, default=None)
    c.add_argument("--studies", type=lambda t: t.split(","), default=None,
                   help="all, none or a subset of rearrangement,fuglede,oscillating,fractal,cheeger")
    c.set_defaults(func=cmd_verify)

    c = sub.add_parser("minimize", help="minimize P_s + εV_s at volume ω_n")
    c.add_argument("--epsilon", type=float, default=0.0)
    c.add_argument("--s", type=float, nargs=1, default=None)
    c.add_argument("--method", choices=["grid_anneal", "radial_descent"], default="grid_anneal")
    c.add_argument("--resolution", type=parse_h, default=None, help="cell size or node count")
    c.add_argument("--iterations", type=int, default=None)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--init", default="square")
    c.add_argument("--out", default=None)
    c.add_argument("--trace", default=None, help="CSV of the energy trace")
    c.add_argument("--final", default=None, help="JSON with the final set")
    c.add_argument("--sweep", action="store_true", help="three starts per ε over --epsilons")
    c.add_argument("--epsilons", type=float, nargs="+", default=[0.0, 0.1])
    c.set_defaults(func=cmd_minimize)

    c = sub.add_parser("cheeger", help="fractional Cheeger constants and stability gaps")
    c.add_argument("--domain", type=parse_names, default=["square"],
                   help="corpus names, random:N:seed or disk:R (R in cells)")
    c.add_argument("--m", type=float, default=0.85)
    c.add_argument("--s", type=float, nargs="+", default=None)
    c.add_argument("--h", default="1/32")
    c.add_argument("--method", choices=["auto", "bruteforce", "heuristic"], default="auto")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_cheeger)

    c = sub.add_parser("family", help="oscillating or fractal family studies")
    c.add_argument("kind", choices=["oscillating", "fractal"])
    c.add_argument("--j-list", type=int, nargs="+", default=[4, 8, 16])
    c.add_argument("--epsilon", type=float, default=0.1)
    c.add_argument("--s", type=float, default=0.5)
    c.add_argument("--h", default=None, help="optional grid cross-check cell size")
    c.add_argument("--m", type=float, default=0.85)
    c.add_argument("--no-cheeger", action="store_true")
    c.add_argument("--a", type=int, default=1)
    c.add_argument("--b", type=int, default=3)
    c.add_argument("--sigma", type=float, default=2 - math.log2(3))
    c.add_argument("--M", type=int, default=3)
    c.add_argument("--cells", type=int, default=16)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_family)

    c = sub.add_parser("plotdata", help="two-column data files from a study CSV")
    c.add_argument("--report", required=True)
    c.add_argument("--outdir", required=True)
    c.set_defaults(func=cmd_plotdata)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    file_cfg = json.loads(Path(args.config).read_text()) if args.config else None
    try:
        return args.func(args, file_cfg)
    except (FileNotFoundError, CacheMismatch, fam.UnderResolved) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FLAG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
