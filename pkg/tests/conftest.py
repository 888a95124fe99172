import numpy as np
import pytest

from ergolab.blending import BlendingRegion
from ergolab.geometry import Box, Manifold
from ergolab.ifs import IFSystem
from ergolab.maps import (Affine1D, ComplexAffine, NorthSouth,
                          PerturbedRotation, Rotation, SineAffine1D, Word)


@pytest.fixture(scope="session")
def unit_interval():
    return Manifold.box([(0.0, 1.0)])


@pytest.fixture(scope="session")
def wide_chart():
    # room on both sides of [0, 1] so blending overflow stays evaluable
    return Manifold.box([(-0.05, 1.05)])


@pytest.fixture(scope="session")
def overlap_maps(unit_interval):
    m = unit_interval
    return (Affine1D(0.6, 0.0, m), Affine1D(0.6, 0.4, m))


@pytest.fixture(scope="session")
def overlap_system(overlap_maps):
    return IFSystem(overlap_maps, beta=0.6, probs=(0.5, 0.5))


@pytest.fixture(scope="session")
def cantor_system(unit_interval):
    m = unit_interval
    return IFSystem((Affine1D(0.4, 0.0, m), Affine1D(0.4, 0.6, m)),
                    beta=0.4, probs=(0.5, 0.5))


@pytest.fixture(scope="session")
def doubling_system(unit_interval):
    m = unit_interval
    return IFSystem((Affine1D(0.5, 0.0, m), Affine1D(0.5, 0.5, m)),
                    beta=0.5, probs=(0.5, 0.5))


@pytest.fixture(scope="session")
def blending_maps(wide_chart):
    m = wide_chart
    return (Affine1D(0.6, 0.0, m), Affine1D(0.6, 0.4, m))


@pytest.fixture(scope="session")
def blending_open(blending_maps):
    # full open core: weak covering holds, strict misses the endpoints
    return BlendingRegion(
        B=Box.of([0.0], [1.0]),
        D=Box.of([-0.03], [1.03]),
        maps=(Word.of(0), Word.of(1)),
        beta=0.6,
    )


@pytest.fixture(scope="session")
def blending_strict(blending_maps):
    return BlendingRegion(
        B=Box.of([0.01], [0.99]),
        D=Box.of([-0.05, ], [1.05]),
        maps=(Word.of(0), Word.of(1)),
        beta=0.6,
    )


@pytest.fixture(scope="session")
def circle_pair():
    return (Rotation(np.sqrt(2.0) - 1.0), NorthSouth(4.0))


@pytest.fixture(scope="session")
def circle_certificate(circle_pair):
    from ergolab.certificates import search_certificate

    res = search_certificate(circle_pair, kappa_target=1.2, max_word_len=8,
                             grid_step=0.01)
    assert res.found
    return res.certificate


@pytest.fixture(scope="session")
def pinned_rotations():
    # same rotation number, distinct phases; shares an invariant arc
    return (PerturbedRotation(0.0, 0.05, 0.0),
            PerturbedRotation(0.0, 0.05, 0.3))


@pytest.fixture(scope="session")
def square_chart():
    return Manifold.box([(-0.05, 1.05), (-0.05, 1.05)])


@pytest.fixture(scope="session")
def quad_system(square_chart):
    m = square_chart
    maps = tuple(
        ComplexAffine(0.7, 0.0, off, m)
        for off in ((0.0, 0.0), (0.3, 0.0), (0.0, 0.3), (0.3, 0.3))
    )
    return IFSystem(maps, beta=0.7, probs=(0.25, 0.25, 0.25, 0.25))


@pytest.fixture(scope="session")
def quad_blending():
    return BlendingRegion(
        B=Box.of([0.01, 0.01], [0.99, 0.99]),
        D=Box.of([-0.05, -0.05], [1.05, 1.05]),
        maps=(Word.of(0), Word.of(1), Word.of(2), Word.of(3)),
        beta=0.7,
    )


@pytest.fixture(scope="session")
def sine_pair(unit_interval):
    m = unit_interval
    return (SineAffine1D(0.6, 0.0, 0.05, manifold=m),
            SineAffine1D(0.6, 0.4, 0.05, manifold=m))
