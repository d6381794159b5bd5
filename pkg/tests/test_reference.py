import json
import math

import pytest

from fraciso.reference import (
    BallReference,
    CacheMismatch,
    CrossCheckFailure,
    analytic_reference,
    build_reference,
    load_cache,
    save_cache,
)


def test_analytic_reference_values():
    r = analytic_reference(2, 0.5)
    assert r.V_s_B1 == pytest.approx(4 * math.pi / 3, rel=1e-15)
    assert r.P_s_B1 == pytest.approx(62.13063877777983, rel=1e-13)
    assert r.c_ns == pytest.approx(r.P_s_B1 * 1.5 / (2 * math.pi))


def test_ball_scaling_helpers():
    r = analytic_reference(2, 0.25)
    assert r.perimeter_ball(2.0) == pytest.approx(r.P_s_B1 * 2**1.75)
    assert r.potential_ball(0.5) == pytest.approx(r.V_s_B1 * 0.5**1.75)


def test_build_reference_records_grid_bias():
    r = build_reference(2, 0.5, 1 / 32, mc_samples=200_000)
    assert 0.01 < r.staircase_bias < 0.03
    assert r.method.endswith("+lens+mc")


def test_build_reference_aborts_on_disagreement(monkeypatch):
    import fraciso.reference as refmod

    monkeypatch.setattr(refmod, "monte_carlo_ball_perimeter", lambda n, s, samples, seed: (70.0, 0.01))
    with pytest.raises(CrossCheckFailure):
        refmod.build_reference(2, 0.5, 1 / 16, grid_ball=False)


def test_cache_round_trip_is_bit_exact(tmp_path):
    refs = [build_reference(2, s, 1 / 16, mc_samples=100_000) for s in (0.25, 0.5)]
    path = tmp_path / "cache.json"
    save_cache(path, refs)
    for r in refs:
        back = load_cache(path, 2, r.s, 1 / 16)
        assert back == r
        assert back.P_s_B1.hex() == r.P_s_B1.hex()


def test_cache_refuses_mismatched_h(tmp_path):
    path = tmp_path / "cache.json"
    save_cache(path, [analytic_reference(2, 0.5, 1 / 64)])
    with pytest.raises(CacheMismatch):
        load_cache(path, 2, 0.5, 1 / 32)
    with pytest.raises(CacheMismatch):
        load_cache(path, 2, 0.25, 1 / 64)


def test_from_dict_round_trip():
    r = analytic_reference(3, 0.5)
    assert BallReference.from_dict(json.loads(json.dumps(r.to_dict()))) == r
