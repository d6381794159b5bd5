import math

import numpy as np
import pytest

from fraciso.functionals import fractional_perimeter
from fraciso.geometry import Ball, GridSet, rasterize_ball
from fraciso.minimizer import (
    GridAnnealer,
    MinimizeConfig,
    ball_competitor,
    default_lambda,
    energy,
    minimize,
    penalized_energy,
    rigidity_sweep,
    threshold_smooth,
)
from fraciso.reference import ball_perimeter, ball_potential


def test_config_validation():
    with pytest.raises(ValueError):
        MinimizeConfig(epsilon=-0.1)
    with pytest.raises(ValueError):
        MinimizeConfig(method="newton")
    with pytest.raises(ValueError):
        MinimizeConfig(s=1.0)
    with pytest.raises(ValueError):
        MinimizeConfig(lambda_penalty=1.0)
    with pytest.raises(ValueError):
        MinimizeConfig(method="radial_descent", n=3)
    cfg = MinimizeConfig(epsilon=0.1)
    assert cfg.lam == pytest.approx(default_lambda(2, 0.5, 0.1))
    assert cfg.target == pytest.approx(math.pi)


def test_energy_of_eps_zero_is_perimeter():
    B = rasterize_ball(Ball((0.0, 0.0), 1.0), 1 / 16)
    assert energy(B, 0.0, 0.5) == fractional_perimeter(B, 0.5)


def test_penalty_is_linear_in_lambda():
    B = rasterize_ball(Ball((0.0, 0.0), 0.9), 1 / 16)
    e = energy(B, 0.1, 0.5)
    p1 = penalized_energy(B, 0.1, 10.0, 0.5) - e
    p2 = penalized_energy(B, 0.1, 20.0, 0.5) - e
    assert p2 == pytest.approx(2 * p1, rel=1e-12)
    assert p1 == pytest.approx(10.0 * abs(B.volume - math.pi), rel=1e-12)


def test_exact_volume_ball_has_no_penalty():
    B = GridSet.from_mask(np.ones((4, 4), bool), math.sqrt(math.pi) / 4)
    assert penalized_energy(B, 0.2, 50.0, 0.5) == pytest.approx(energy(B, 0.2, 0.5), rel=1e-12)


def test_ball_competitor_volume_is_closest():
    h = 1 / 32
    B = ball_competitor(2, h)
    assert abs(B.volume - math.pi) <= abs(rasterize_ball(Ball((0.0, 0.0), 1.0), h).volume - math.pi)


def test_annealer_incremental_bookkeeping():
    cfg = MinimizeConfig(epsilon=0.1, s=0.5, resolution=1 / 16, checkpoint_every=1000, iterations=1000)
    E = rasterize_ball(Ball((0.1, 0.0), 0.8), 1 / 16)
    ann = GridAnnealer(E, cfg)
    rng = np.random.default_rng(3)
    # 1000 random single flips applied without any resync
    cur = ann.total()
    for _ in range(1000):
        pool = ann.inner if rng.random() < 0.5 else ann.outer
        i = np.unravel_index(pool.pick(rng), ann.shape)
        if ann.chi[i] and ann.count == 1:
            continue
        cur = ann.propose_flip(i)
        ann.flip(i)
    assert cur == pytest.approx(ann.from_scratch(), rel=1e-8)


def test_annealer_rejects_set_outside_window():
    cfg = MinimizeConfig(resolution=1 / 8)
    E = rasterize_ball(Ball((0.0, 0.0), 2.0), 1 / 8)
    with pytest.raises(ValueError):
        GridAnnealer(E, cfg)


def test_threshold_smooth_preserves_count():
    rng = np.random.default_rng(0)
    chi = rng.random((40, 40)) < 0.3
    out = threshold_smooth(chi, int(chi.sum()), widths=(4, 2))
    assert out.sum() == chi.sum()


def test_radial_descent_from_sin3_reaches_ball():
    cfg = MinimizeConfig(epsilon=0.0, s=0.5, method="radial_descent", resolution=128, iterations=200,
                         init="sin3", init_amplitude=0.2)
    r = minimize(cfg)
    assert r.converged
    assert r.hausdorff <= 2 / 48
    assert r.volume_error <= 1e-10
    assert all(np.diff(r.trace) <= 0)
    assert r.energy <= ball_perimeter(2, 0.5) + 1e-6


def test_radial_descent_is_deterministic():
    cfg = MinimizeConfig(epsilon=0.1, method="radial_descent", resolution=64, iterations=20, init="mixed")
    a, b = minimize(cfg), minimize(cfg)
    assert a.trace == b.trace
    assert np.array_equal(a.final.samples, b.final.samples)


def test_radial_descent_needs_even_nodes():
    with pytest.raises(ValueError):
        minimize(MinimizeConfig(method="radial_descent", resolution=33))


def test_coarse_grid_anneal():
    h = 1 / 24
    cfg = MinimizeConfig(epsilon=0.1, s=0.5, resolution=h, iterations=4000, seed=1)
    r = minimize(cfg)
    assert r.checkpoint_error < 1e-8
    assert r.converged
    assert r.hausdorff <= 3 * h
    assert r.energy <= r.ball_energy + 1e-6


def test_sweep_reports_positive_delta_over_zeta():
    rows = rigidity_sweep(0.5, [0.0, 0.1], method="radial_descent", resolution=64, iterations=60)
    assert [r.epsilon for r in rows] == [0.0, 0.1]
    for r in rows:
        assert r.all_converged
        assert r.max_distance <= 2 / 48
        assert r.min_delta_over_zeta > 0
        assert r.max_energy_gap <= 1e-6 + 1e-6 * (ball_perimeter(2, 0.5) + r.epsilon * ball_potential(2, 0.5))
