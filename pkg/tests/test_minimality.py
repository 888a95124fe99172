"""Orbit density, certificate amplification, and invariant-set scans."""
import numpy as np
import pytest

from ergolab.geometry import InputError, verify_cover
from ergolab.maps import (
    Affine2D,
    ExpandingCircle,
    NorthSouth,
    Rotation,
    Translation2,
    word_map,
)
from ergolab.minimality import amplify_density, invariant_arc_scan, orbit_eps_density


def test_rotation_orbit_reaches_the_target_density():
    gens = (Rotation(np.sqrt(2.0) - 1.0),)
    sample = orbit_eps_density(gens, [0.2], eps_target=0.05)
    assert sample.achieved_eps <= 0.05
    assert sample.depth_reached <= 40
    assert len(sample.points) == len(sample.words)


def test_orbit_words_replay_their_points():
    gens = (Rotation(np.sqrt(2.0) - 1.0), NorthSouth(4.0))
    sample = orbit_eps_density(gens, [0.3], eps_target=0.1, max_depth=12)
    x0 = np.array([sample.base_point])
    for idx in (0, len(sample.points) // 2, len(sample.points) - 1):
        replayed = word_map(gens, sample.words[idx]).eval(x0)
        m = gens[0].manifold
        assert float(np.asarray(m.distance(replayed, sample.points[idx]))[0]) < 1e-9


def test_orbit_guards_the_target():
    with pytest.raises(InputError):
        orbit_eps_density((Rotation(0.1),), [0.0], eps_target=0.0)


def test_contracting_orbit_stalls_short_of_density():
    # a single north-south map funnels everything to one attractor
    sample = orbit_eps_density((NorthSouth(4.0),), [0.25], eps_target=0.05,
                               max_depth=30)
    assert sample.achieved_eps > 0.2


def test_amplification_shrinks_the_covering_radius(circle_pair,
                                                   circle_certificate):
    cert = circle_certificate
    m = circle_pair[0].manifold
    lb = verify_cover(m, cert.cover, 2e-3).lebesgue_number_lower_bound
    orbit = orbit_eps_density(circle_pair, [0.3], eps_target=0.045,
                              max_depth=24)
    assert orbit.achieved_eps <= lb / cert.kappa
    out = amplify_density(circle_pair, cert, orbit, lebesgue_bound=lb)
    ratio = out.achieved_eps / orbit.achieved_eps
    assert ratio <= 1.0 / cert.kappa + 0.05
    assert out.base_point == orbit.base_point
    assert out.eval_step == orbit.eval_step
    # every appended point still replays from the base point
    idx = len(orbit.points) + 3
    replayed = word_map(circle_pair, out.words[idx]).eval(
        np.array([out.base_point])
    )
    assert float(np.asarray(m.distance(replayed, out.points[idx]))[0]) < 1e-9


def test_amplification_rejects_a_coarse_orbit(circle_pair,
                                              circle_certificate):
    cert = circle_certificate
    m = circle_pair[0].manifold
    lb = verify_cover(m, cert.cover, 2e-3).lebesgue_number_lower_bound
    orbit = orbit_eps_density(circle_pair, [0.3], eps_target=0.1,
                              max_depth=24)
    with pytest.raises(InputError):
        amplify_density(circle_pair, cert, orbit, lebesgue_bound=lb)


def test_minimal_pair_has_no_invariant_arc(circle_pair):
    assert invariant_arc_scan(circle_pair, grid_step=0.01) == []


def test_pinned_pair_shares_a_trapping_arc(pinned_rotations):
    # both maps fix their repeller; the arc between the repellers, holding
    # both attractors, maps into itself under each generator
    arcs = invariant_arc_scan(pinned_rotations, grid_step=0.01)
    assert len(arcs) == 1
    arc = arcs[0]
    assert arc["start"] == pytest.approx(0.3, abs=0.02)
    assert arc["end"] == pytest.approx(0.0, abs=0.02)
    assert arc["length"] == pytest.approx(0.7, abs=0.03)


def test_scan_rejects_non_injective_generators():
    with pytest.raises(InputError):
        invariant_arc_scan((ExpandingCircle(2),), grid_step=0.05)


def test_scan_2d_reports_candidate_boxes(square_chart):
    m = square_chart
    gens = (Affine2D(0.5, 0.5, 0.0, 0.0, m),)
    boxes = invariant_arc_scan(gens, grid_step=0.1)
    assert boxes
    lo, hi = m.bounds[0]
    for b in boxes:
        # proper: never the whole chart
        assert (b["hi"][0] - b["lo"][0] < hi - lo - 1e-9
                or b["hi"][1] - b["lo"][1] < hi - lo - 1e-9)
        # necessary condition: corner images stay inside
        corners = np.array([
            [b["lo"][0], b["lo"][1]],
            [b["lo"][0], b["hi"][1]],
            [b["hi"][0], b["lo"][1]],
            [b["hi"][0], b["hi"][1]],
        ])
        img = gens[0].eval(corners)
        assert np.all(img[:, 0] >= b["lo"][0] - 1e-9)
        assert np.all(img[:, 0] <= b["hi"][0] + 1e-9)
        assert np.all(img[:, 1] >= b["lo"][1] - 1e-9)
        assert np.all(img[:, 1] <= b["hi"][1] + 1e-9)


def test_scan_2d_rejects_the_torus():
    with pytest.raises(InputError):
        invariant_arc_scan((Translation2(0.1, 0.2),), grid_step=0.1)
