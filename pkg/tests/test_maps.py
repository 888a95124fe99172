import numpy as np
import pytest

from ergolab.geometry import InputError, Manifold
from ergolab.maps import (Affine1D, Affine2D, ComplexAffine, ExpandingCircle,
                          NorthSouth, PerturbedRotation, Rotation,
                          SineAffine1D, Word, map_from_config, map_to_config,
                          perturb_generators, word_map)


def _numeric_deriv(g, x, h=1e-6):
    a = g.eval(np.asarray(x) + h)
    b = g.eval(np.asarray(x) - h)
    return (a - b) / (2 * h)


ALL_CIRCLE = [Rotation(0.37), PerturbedRotation(0.1, 0.2, 0.4),
              NorthSouth(3.0), ExpandingCircle(2)]


@pytest.mark.parametrize("g", ALL_CIRCLE, ids=lambda g: type(g).__name__)
def test_jacobian_matches_finite_differences(g):
    rng = np.random.default_rng(11)
    x = rng.random((64, 1))
    jac = g.jac(x)[..., 0, 0]
    num = _numeric_deriv(g, x)[:, 0]
    # circle values wrap, compare derivatives of the lift
    num = np.where(np.abs(num) > g.sup_op_norm() * 2, np.nan, num)
    mask = ~np.isnan(num)
    assert np.allclose(jac[mask], num[mask], rtol=1e-5, atol=1e-5)


@pytest.mark.parametrize("g", [Rotation(0.37), PerturbedRotation(0.1, 0.2, 0.4),
                               NorthSouth(3.0)],
                         ids=lambda g: type(g).__name__)
def test_inverse_round_trip(g):
    rng = np.random.default_rng(5)
    x = rng.random((128, 1))
    back = g.inverse_map().eval(g.eval(x))
    assert np.allclose(g.manifold.distance(back, x), 0.0, atol=1e-9)


def test_declared_bounds_hold_on_samples():
    for g in ALL_CIRCLE:
        x = np.linspace(0, 1, 4096)[:, None]
        d = np.abs(g.jac(x)[..., 0, 0])
        assert d.max() <= g.sup_op_norm() * (1 + 1e-9)
        slope = np.abs(np.diff(np.log(d[:, ]))) / (x[1, 0] - x[0, 0])
        assert slope.max() <= g.log_deriv_lipschitz() * (1 + 1e-3) + 1e-9


def test_affine1d_rejects_points_off_the_chart():
    from ergolab.geometry import DomainError

    m = Manifold.box([(0.0, 1.0)])
    g = Affine1D(0.6, 0.0, m)
    assert g.eval(np.array([[1.0]]))[0, 0] == pytest.approx(0.6)
    with pytest.raises(DomainError):
        g.eval(np.array([[1.5]]))


def test_sine_affine_needs_dominant_slope():
    m = Manifold.box([(0.0, 1.0)])
    with pytest.raises(InputError):
        SineAffine1D(0.1, 0.0, 0.1, manifold=m)


def test_sine_affine_inverse_and_curvature():
    m = Manifold.box([(0.0, 1.0)])
    g = SineAffine1D(0.6, 0.2, 0.05, manifold=m)
    x = np.linspace(0.0, 1.0, 257)[:, None]
    y = g.eval(x)
    back = g.inverse_map().eval(y)
    assert np.allclose(back, x, atol=1e-12)
    # declared curvature constant is the exact sup of |h''/h'|
    d = g.deriv(x[:, 0])
    dd = np.gradient(d, x[:, 0])
    assert np.abs(dd / d).max() <= g.hoelder.C * (1 + 1e-2)


def test_word_map_applies_left_letter_first():
    m = Manifold.box([(0.0, 1.0)])
    g0 = Affine1D(0.5, 0.0, m)
    g1 = Affine1D(0.5, 0.5, m)
    w = word_map([g0, g1], Word.of(0, 1))
    # letter 0 acts first: x -> x/2 -> x/4 + 1/2
    assert w.eval(np.array([[1.0]]))[0, 0] == pytest.approx(0.75)


def test_word_parse_round_trip():
    w = Word.of(0, 1, 0)
    assert str(w) == "0-1-0"
    assert Word.parse(str(w)) == w


def test_composed_chain_bounds():
    g = NorthSouth(2.0)
    r = Rotation(0.21)
    comp = word_map([r, g], Word.of(1, 0))
    assert comp.sup_op_norm() == pytest.approx(g.sup_op_norm())
    expect = g.log_deriv_lipschitz() * 1.0 + 0.0 * g.sup_op_norm()
    assert comp.log_deriv_lipschitz() == pytest.approx(expect)


def test_config_round_trip_for_every_family():
    m2 = Manifold.box([(-0.05, 1.05), (-0.05, 1.05)])
    cases = [
        Rotation(0.3),
        PerturbedRotation(0.1, 0.04, 0.2),
        NorthSouth(2.5),
        ExpandingCircle(3),
        Affine1D(0.6, 0.4, Manifold.box([(0.0, 1.0)])),
        SineAffine1D(0.7, 0.1, 0.02, manifold=Manifold.box([(0.0, 1.0)])),
        Affine2D(0.7, 0.5, 0.1, 0.2, m2),
        ComplexAffine(0.7, 0.3, (0.1, 0.1), m2),
    ]
    for g in cases:
        cfg = map_to_config(g)
        h = map_from_config(g.manifold, cfg)
        x = np.full((3, g.manifold.dim), 0.31)
        assert np.allclose(g.eval(x), h.eval(x))


def test_config_rejects_unknown_family_and_params():
    m = Manifold.circle()
    with pytest.raises(InputError):
        map_from_config(m, {"family": "spiral"})
    with pytest.raises(InputError):
        map_from_config(m, {"family": "rotation", "params": {"thetb": 1}})


def test_perturbation_stays_within_budget():
    gens = (Rotation(0.3), NorthSouth(2.0))
    rng = np.random.default_rng(9)
    x = np.linspace(0, 1, 512)[:, None]
    for delta in (1e-3, 1e-2):
        pg = perturb_generators(gens, delta, rng)
        for g, p in zip(gens, pg):
            gap = np.abs(g.manifold.displacement(p.eval(x), g.eval(x)))
            dgap = np.abs(p.jac(x) - g.jac(x))
            assert gap.max() <= delta * (1 + 1e-6)
            assert dgap.max() <= delta * (1 + 1e-6)


def test_complex_affine_is_conformal_rotation_scaling():
    m = Manifold.box([(-0.05, 1.05), (-0.05, 1.05)])
    g = ComplexAffine(0.7, 0.25, (0.1, 0.0), m)
    j = g.jac(np.array([[0.4, 0.4]]))[0]
    s = np.linalg.svd(j, compute_uv=False)
    assert s[0] == pytest.approx(0.7)
    assert s[1] == pytest.approx(0.7)
