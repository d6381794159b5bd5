import json
import math

import numpy as np
import pytest

from fraciso.geometry import (
    Ball,
    GridSet,
    RadialProfile,
    barycenter,
    boundary_cells,
    hausdorff_distance_to_ball,
    rasterize,
    rasterize_ball,
    refine,
    scale,
    schwarz_rearrangement,
    symmetric_difference_volume,
    translate,
    unit_ball_volume,
)


def test_unit_ball_volume():
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


def test_gridset_is_immutable_and_deduplicated():
    E = GridSet([[0, 0], [0, 0], [1, 0]], 0.5)
    assert len(E) == 2
    assert E.volume == pytest.approx(0.5)
    with pytest.raises(AttributeError):
        E.h = 1.0
    with pytest.raises(ValueError):
        GridSet([[0, 0]], 0.0)


def test_gridset_json_round_trip():
    E = GridSet([[0, 0], [3, -2], [1, 5]], 0.125, origin=(0.25, -1.0))
    F = GridSet.from_json(E.to_json())
    assert F == E
    json.loads(E.to_json())


def test_rasterized_ball_volume_converges():
    errs = [abs(rasterize_ball(Ball((0.0, 0.0), 1.0), h).volume - math.pi) for h in (1 / 16, 1 / 64)]
    assert errs[1] < errs[0]
    assert errs[1] < 0.01


def test_profile_area_is_exact_for_trigonometric_profiles():
    eps = 0.1
    P = RadialProfile.from_function(lambda t: eps * np.sin(4 * t), 64)
    assert P.area() == pytest.approx(math.pi * (1 + eps**2 / 2), rel=1e-14)


def test_profile_rejects_non_star_shaped():
    with pytest.raises(ValueError):
        RadialProfile(np.full(16, -1.0))


def test_rasterize_profile_matches_area():
    P = RadialProfile.from_function(lambda t: 0.1 * np.cos(3 * t), 128)
    E = rasterize(P, 1 / 128)
    assert E.volume == pytest.approx(P.area(), rel=2e-3)


def test_scale_and_refine_describe_the_same_dilation():
    E = GridSet([[0, 0], [1, 0], [1, 1]], 0.25)
    F = refine(E, 2)
    assert len(F) == 4 * len(E)
    assert F.volume == pytest.approx(E.volume)
    assert scale(E, 2.0).volume == pytest.approx(4 * E.volume)


def test_translate_moves_barycenter():
    E = rasterize_ball(Ball((0.0, 0.0), 0.5), 1 / 32)
    F = translate(E, (0.25, -0.5))
    assert barycenter(F) - barycenter(E) == pytest.approx([0.25, -0.5])


def test_schwarz_rearrangement_preserves_volume():
    E = GridSet([[0, 0], [5, 5], [9, 1]], 0.1)
    B = schwarz_rearrangement(E)
    assert B.volume == pytest.approx(E.volume)
    assert B.center == (0.0, 0.0)


def test_symmetric_difference_of_ball_with_itself_is_small():
    B = Ball((0.0, 0.0), 1.0)
    E = rasterize_ball(B, 1 / 64)
    # staircase cells straddle the circle: at most half a cell deep along its length
    assert symmetric_difference_volume(E, B, subsample=8) < math.pi / 64


def test_boundary_cells_of_a_block():
    m = np.ones((4, 4), bool)
    E = GridSet.from_mask(m, 1.0)
    assert len(boundary_cells(E)) == 12


def test_hausdorff_distance_ball():
    B = Ball((0.0, 0.0), 1.0)
    E = rasterize_ball(B, 1 / 32)
    assert hausdorff_distance_to_ball(E, B) <= 2 / 32
    F = rasterize_ball(Ball((0.0, 0.0), 1.2), 1 / 32)
    assert hausdorff_distance_to_ball(F, B) == pytest.approx(0.2, abs=2 / 32)
