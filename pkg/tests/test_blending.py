"""Blending verification, cycle search, and pullback coding."""
import numpy as np
import pytest

from ergolab.blending import (
    BlendingRegion,
    CodingError,
    code_point,
    find_cycle,
    verify_blending,
)
from ergolab.geometry import Ball, Box, InputError
from ergolab.maps import Word


def test_region_validates_rate_and_words():
    B = Box.of([0.0], [1.0])
    with pytest.raises(InputError):
        BlendingRegion(B=B, D=B, maps=(Word.of(0),), beta=1.0)
    with pytest.raises(InputError):
        BlendingRegion(B=B, D=B, maps=(), beta=0.5)


def test_weak_mode_passes_on_full_core(blending_maps, blending_open):
    rep = verify_blending(blending_maps, blending_open, mode="weak",
                          grid_step=1e-3)
    assert rep.ok
    assert rep.covering_ok and rep.contraction_ok and rep.containment_ok
    assert rep.mode == "weak"


def test_strict_mode_fails_at_the_endpoints(blending_maps, blending_open):
    # the two images tile [0, 1] exactly, so the closure misses by a hair
    rep = verify_blending(blending_maps, blending_open, mode="strict",
                          grid_step=1e-3)
    assert not rep.covering_ok
    assert not rep.ok
    worst_val, worst_pt = rep.covering_worst
    assert worst_val <= 0
    assert min(abs(worst_pt[0]), abs(worst_pt[0] - 1.0)) < 1e-2


def test_strict_mode_passes_on_shrunk_core(blending_maps, blending_strict):
    rep = verify_blending(blending_maps, blending_strict, mode="strict",
                          grid_step=1e-3)
    assert rep.ok
    # affine words contract at exactly the declared rate
    assert abs(rep.contraction_worst[0] - 0.6) < 1e-9
    assert rep.containment_worst[0] > 0


def test_unknown_mode_is_rejected(blending_maps, blending_strict):
    with pytest.raises(InputError):
        verify_blending(blending_maps, blending_strict, mode="fuzzy")


def test_quad_region_verifies_strictly(quad_system, quad_blending):
    rep = verify_blending(quad_system.maps, quad_blending, mode="strict",
                          grid_step=2e-3, n_pairs=20_000)
    assert rep.ok
    assert abs(rep.contraction_worst[0] - 0.7) < 1e-9


def test_cycle_found_on_the_circle(circle_pair):
    region = BlendingRegion(
        B=Ball.of([0.5], 0.15),
        D=Ball.of([0.5], 0.2),
        maps=(Word.of(1),),
        beta=0.5,
    )
    wit = find_cycle(circle_pair, region, max_word_len=8, grid_step=0.01)
    assert wit.found
    assert wit.T_words and wit.S_words
    assert wit.t_residual == () and wit.s_residual == ()


def test_cycle_not_found_without_global_maps(blending_maps, blending_open):
    # contractions of a chart are not diffeomorphisms of it, so the
    # outgoing side of the cycle can never be certified
    wit = find_cycle(blending_maps, blending_open, max_word_len=4,
                     grid_step=0.01)
    assert not wit.found
    assert wit.s_residual


def test_coding_fixed_point_picks_one_digit(blending_maps, blending_open):
    res = code_point(blending_maps, blending_open, [0.0], n=12)
    assert res.digits == (0,) * 12
    assert len(res.pullbacks) == 13
    assert res.error_bound == pytest.approx(0.6 ** 12 * 1.0)


def test_coding_bound_holds_for_any_anchor(blending_maps, blending_strict):
    res = code_point(blending_maps, blending_strict, [0.5], n=10, y=[0.3])
    assert res.error_bound == pytest.approx(0.6 ** 10 * 0.98)
    assert res.distance is not None
    assert res.distance <= res.error_bound + 1e-12
    assert len(res.word.letters) == 10


def test_coding_random_points_contract_geometrically(blending_maps,
                                                     blending_open):
    rng = np.random.default_rng(7)
    for _ in range(25):
        x = float(rng.uniform(0.0, 1.0))
        y = float(rng.uniform(0.0, 1.0))
        for n in (5, 10):
            res = code_point(blending_maps, blending_open, [x], n=n, y=[y])
            assert res.distance <= 0.6 ** n * 1.0 + 1e-12


def test_coding_rejects_points_off_the_core(blending_maps, blending_open):
    with pytest.raises(InputError):
        code_point(blending_maps, blending_open, [1.02], n=3)


def test_coding_error_reports_the_level(blending_maps):
    # with only the left branch available, 0.8 has no pullback in the core
    region = BlendingRegion(
        B=Box.of([0.0], [1.0]),
        D=Box.of([-0.03], [1.03]),
        maps=(Word.of(0),),
        beta=0.6,
    )
    with pytest.raises(CodingError) as err:
        code_point(blending_maps, region, [0.8], n=4)
    assert err.value.level >= 1
