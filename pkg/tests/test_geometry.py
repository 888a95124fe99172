import numpy as np
import pytest

from ergolab.geometry import (Ball, Box, Cover, InputError, Manifold,
                              diam_functionals, verify_cover)
from ergolab.maps import Affine1D, ComplexAffine, Rotation


def test_circle_distance_wraps():
    m = Manifold.circle()
    assert m.distance([[0.95]], [[0.05]])[0] == pytest.approx(0.1)
    assert m.distance([[0.25]], [[0.75]])[0] == pytest.approx(0.5)


def test_torus_distance_is_euclidean_on_shortest_lift():
    m = Manifold.torus2()
    d = m.distance([[0.9, 0.9]], [[0.1, 0.1]])[0]
    assert d == pytest.approx(np.sqrt(0.08))


def test_box_reduce_is_identity_inside():
    m = Manifold.box([(0.0, 2.0)])
    pts = np.array([[0.3], [1.7]])
    assert np.array_equal(m.reduce(pts), pts)


def test_displacement_matches_distance():
    m = Manifold.circle()
    rng = np.random.default_rng(3)
    p = rng.random((50, 1))
    q = rng.random((50, 1))
    disp = m.displacement(p, q)
    assert np.allclose(np.abs(disp[:, 0]), m.distance(p, q))


def test_ball_margin_sign():
    m = Manifold.circle()
    ball = Ball.of([0.5], 0.2)
    inside = np.asarray(ball.margin(m, [[0.55]]))
    outside = np.asarray(ball.margin(m, [[0.9]]))
    assert inside > 0 > outside


def test_ball_grid_keeps_rim_points():
    # the certificate slack bound relies on rim samples being present
    m = Manifold.circle()
    ball = Ball.of([0.71], 0.0825)
    pts = ball.grid(m, 0.0025)
    assert pts.min() == pytest.approx(0.71 - 0.0825, abs=1e-12)
    assert pts.max() == pytest.approx(0.71 + 0.0825, abs=1e-12)


def test_box_region_contains_and_diam():
    box = Box.of([0.0, 0.0], [1.0, 2.0])
    assert box.diam() == pytest.approx(np.sqrt(5.0))
    m = Manifold.box([(-1.0, 2.0), (-1.0, 3.0)])
    assert np.asarray(box.margin(m, [[0.5, 1.0]])) > 0


def test_cover_verification_reports_lebesgue_bound():
    m = Manifold.circle()
    cover = Cover((Ball.of([0.0], 0.3), Ball.of([0.4], 0.3),
                   Ball.of([0.75], 0.3)))
    rep = verify_cover(m, cover, grid_step=1e-3)
    assert rep.covers
    assert rep.lebesgue_number_lower_bound > 0.0


def test_cover_gap_detected():
    m = Manifold.circle()
    cover = Cover((Ball.of([0.0], 0.2), Ball.of([0.5], 0.2)))
    rep = verify_cover(m, cover, grid_step=1e-3)
    assert not rep.covers
    # worst point sits in one of the two uncovered gaps
    x = rep.worst_point[0]
    assert 0.2 < x < 0.3 or 0.7 < x < 0.8


def test_interval_diam_functionals_exact():
    m = Manifold.box([(0.0, 1.0)])
    h = Affine1D(0.5, 0.1, m)
    pts = np.linspace(0.0, 1.0, 2001)[:, None]
    d = diam_functionals(m, h.eval(pts), tol=1e-3)
    assert d["diamsup"] == pytest.approx(0.5, rel=1e-3)
    assert d["diaminf"] == pytest.approx(0.5, rel=2e-2)


def test_disk_roundness_near_one():
    from ergolab.ifs import _solid_ball

    m = Manifold.box([(-2.0, 2.0), (-2.0, 2.0)])
    pts, spacing = _solid_ball(Ball.of([0.0, 0.0], 1.0), 2, 20000)
    h = ComplexAffine(1.0, 0.3, (0.0, 0.0), m)
    d = diam_functionals(m, h.eval(pts), tol=4.0 * spacing)
    assert d["diamsup"] == pytest.approx(2.0, rel=2e-2)
    # inscribed estimate is biased low by design, never high
    assert d["diaminf"] <= d["diamsup"] + 1e-12
    assert d["diaminf"] >= 0.9 * d["diamsup"]


def test_diam_tolerance_guard():
    m = Manifold.box([(0.0, 1.0), (0.0, 1.0)])
    pts = np.random.default_rng(1).random((100, 2))
    with pytest.raises(InputError):
        diam_functionals(m, pts, tol=1e-9)


def test_rotation_preserves_rim_distances():
    m = Manifold.circle()
    rot = Rotation(0.3)
    p = np.array([[0.1], [0.6]])
    assert m.distance(rot.eval(p[:1]), rot.eval(p[1:]))[0] == pytest.approx(
        m.distance(p[:1], p[1:])[0])
