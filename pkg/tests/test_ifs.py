"""Attractor covers, stationary measures, and distortion bounds."""
import numpy as np
import pytest
import scipy.ndimage

from ergolab.geometry import InputError, Manifold
from ergolab.maps import Affine1D
from ergolab.ifs import (
    GridMeasure,
    IFSystem,
    ac_diagnostic,
    chaos_game,
    distortion_constants,
    empirical_distortion,
    hutchinson_attractor,
    ulam_stationary,
    vitali_check,
)


def test_system_validates_inputs(unit_interval):
    m = unit_interval
    maps = (Affine1D(0.5, 0.0, m), Affine1D(0.5, 0.5, m))
    with pytest.raises(InputError):
        IFSystem(maps, beta=1.0)
    with pytest.raises(InputError):
        IFSystem(maps, beta=0.5, probs=(0.7, 0.7))
    with pytest.raises(InputError):
        IFSystem(maps, beta=0.5, probs=(0.5,))
    # declared bound below the true ratio is caught by sampling
    with pytest.raises(InputError):
        IFSystem(maps, beta=0.3).validate()
    assert IFSystem(maps, beta=0.5).validate() <= 0.5 + 1e-9


def test_overlap_attractor_fills_the_interval(overlap_system):
    res = hutchinson_attractor(overlap_system, 512)
    assert res.converged
    assert res.residual == 0
    assert res.boxes.count() == 512


def test_cantor_sweeps_track_the_construction(cantor_system):
    # n sweeps leave 2^n blocks of about 0.4^n * res boxes each; the
    # outer padding inflates every block by a bounded box count
    for n in (1, 2, 3, 4):
        res = hutchinson_attractor(cantor_system, 1024, max_iter=n)
        _, blocks = scipy.ndimage.label(res.boxes.mask)
        if n <= 3:
            assert blocks == 2 ** n
        ideal = 2 ** n * round(0.4 ** n * 1024)
        assert abs(res.boxes.count() - ideal) <= 2 ** n * 6


def test_cantor_cover_reaches_a_fixed_set(cantor_system):
    res = hutchinson_attractor(cantor_system, 1024)
    assert res.converged
    assert res.residual == 0
    # strictly between the Cantor set's box count and the full interval
    assert 0 < res.boxes.count() < 1024


def test_doubling_ulam_is_exactly_uniform(doubling_system):
    res = ulam_stationary(doubling_system, 64)
    assert float(np.abs(res.measure.weights - 1.0 / 64).max()) <= 1e-12
    assert res.residual <= 1e-12


def test_overlap_ulam_converges(overlap_system):
    res = ulam_stationary(overlap_system, 128)
    assert res.residual < 1e-8
    assert res.second_measure is None
    assert float(res.measure.weights.sum()) == pytest.approx(1.0)


def test_chaos_game_guards_sample_count(doubling_system):
    with pytest.raises(InputError):
        chaos_game(doubling_system, 9_999, 32)


def test_chaos_game_is_seed_deterministic(doubling_system):
    a = chaos_game(doubling_system, 20_000, 32, seed=5)
    b = chaos_game(doubling_system, 20_000, 32, seed=5)
    c = chaos_game(doubling_system, 20_000, 32, seed=6)
    assert np.array_equal(a.measure.weights, b.measure.weights)
    assert not np.array_equal(a.measure.weights, c.measure.weights)
    assert len(a.stream_measures) == a.streams


def test_chaos_points_reproduce_the_histogram(doubling_system):
    res = chaos_game(doubling_system, 20_000, 32, seed=1, keep_points=True)
    assert res.points is not None and len(res.points) == 20_000
    rebuilt = GridMeasure.from_points(doubling_system.manifold, 32, res.points)
    assert np.allclose(rebuilt.weights, res.measure.weights)


def test_chaos_game_approaches_the_ulam_measure(doubling_system):
    mu_box = ulam_stationary(doubling_system, 64).measure
    mu_orbit = chaos_game(doubling_system, 1_000_000, 64, seed=11).measure
    assert mu_box.l1_distance(mu_orbit) <= 0.02


def test_distortion_constants_closed_form():
    d = distortion_constants(alpha=1.0, C=2.0, kappa=4.0, K=1.0)
    series = 2.0 * 0.25 / 0.75
    assert d.L_H == pytest.approx(np.exp(series))
    assert d.K_H == pytest.approx(np.exp(-series))
    assert d.L_H * d.K_H == pytest.approx(1.0)
    for bad in (dict(alpha=0.0), dict(C=-1.0), dict(kappa=1.0), dict(K=0.0)):
        kw = dict(alpha=1.0, C=2.0, kappa=4.0, K=1.0)
        kw.update(bad)
        with pytest.raises(InputError):
            distortion_constants(**kw)


def test_affine_words_carry_no_distortion(overlap_maps):
    oracle = empirical_distortion(overlap_maps, depth=4, n_pairs=100)
    bound = distortion_constants(alpha=1.0, C=0.0, kappa=1.0 / 0.6, K=1.0)
    assert bound.L_H == 1.0
    assert oracle.sup_det_ratio <= bound.L_H * (1.0 + 1e-12)
    assert oracle.sup_roundness_ratio <= 1.0 + 1e-9
    assert oracle.words_checked == 2 + 4 + 8 + 16


def test_sine_words_stay_under_the_closed_form(sine_pair):
    oracle = empirical_distortion(sine_pair, depth=3, n_pairs=100)
    # the maps really bend: the oracle must see distortion, and the
    # geometric-series bound from the curvature data must still cap it
    assert oracle.sup_det_ratio > 1.001
    rate = max(g.sup_op_norm() for g in sine_pair)
    C = max(g.log_deriv_lipschitz() for g in sine_pair)
    bound = distortion_constants(alpha=1.0, C=C, kappa=1.0 / rate, K=1.1)
    assert oracle.sup_det_ratio <= bound.L_H


def test_conformal_images_stay_round(quad_system):
    oracle = empirical_distortion(quad_system.maps, depth=2, n_pairs=60)
    assert oracle.sup_det_ratio <= 1.0 + 1e-9
    assert oracle.sup_roundness_ratio <= 1.2


def test_vitali_regularity_on_the_doubling_cover(doubling_system):
    rep = vitali_check(doubling_system, depth=4, resolution=128)
    assert rep.v_regular
    assert rep.shrinking_cover_ok
    assert rep.cover_failures == 0
    assert rep.excluded == 0
    assert rep.c_vitali == pytest.approx(1.0, abs=0.1)


def test_ac_diagnostic_on_a_full_support_measure(doubling_system):
    att = hutchinson_attractor(doubling_system, 64).boxes
    mu = ulam_stationary(doubling_system, 64).measure
    rep = ac_diagnostic(mu, att)
    assert rep.verdict == "equivalent-on-delta"
    assert rep.frac_null_on_delta == 0.0
    assert rep.mass_outside_delta == 0.0


def test_ac_diagnostic_flags_a_thin_attractor(unit_interval):
    m = unit_interval
    thin = IFSystem((Affine1D(0.3, 0.0, m), Affine1D(0.3, 0.7, m)),
                    beta=0.3, probs=(0.5, 0.5))
    att = hutchinson_attractor(thin, 512).boxes
    mu = ulam_stationary(thin, 512).measure
    rep = ac_diagnostic(mu, att, levels=5)
    assert rep.verdict == "singular-leaning"
    assert rep.trend_ratio < 0.9
    assert len(rep.occupancy_fractions) == 5


def test_ac_diagnostic_requires_matching_grids(doubling_system):
    att = hutchinson_attractor(doubling_system, 64).boxes
    mu = ulam_stationary(doubling_system, 32).measure
    with pytest.raises(InputError):
        ac_diagnostic(mu, att)


def test_grid_measure_coarsen_preserves_mass(unit_interval):
    rng = np.random.default_rng(0)
    mu = GridMeasure(unit_interval, 8, rng.random(8))
    half = mu.coarsen()
    assert half.res == 4
    assert float(half.weights.sum()) == pytest.approx(1.0)
    assert np.allclose(half.weights, mu.weights.reshape(4, 2).sum(axis=1))
