import numpy as np
import pytest

from ergolab.certificates import (CertificateItem, ExpandingCertificate,
                                  certificate_from_dict, certificate_to_dict,
                                  robustness_radius, search_certificate,
                                  verify_expanding)
from ergolab.geometry import Ball, InputError
from ergolab.maps import NorthSouth, Rotation, Word, perturb_generators


def test_search_finds_expanding_cover(circle_pair, circle_certificate):
    cert = circle_certificate
    assert cert.kappa >= 1.2
    assert all(item.kappa_i >= 1.2 for item in cert.items)


def test_certificate_survives_finer_grids(circle_pair, circle_certificate):
    # kappa_i carries a between-grid-points allowance, so refining the
    # verification grid must never break a found certificate
    for step in (2e-3, 5e-4):
        rep = verify_expanding(circle_pair, circle_certificate, grid_step=step)
        assert rep.valid
        assert min(rep.item_margins) > 0


def test_verifier_rejects_inflated_claims(circle_pair, circle_certificate):
    items = tuple(
        CertificateItem(ball=i.ball, word=i.word, kappa_i=i.kappa_i * 1.2)
        for i in circle_certificate.items
    )
    rep = verify_expanding(circle_pair, ExpandingCertificate(items),
                           grid_step=1e-3)
    assert not rep.valid
    assert min(rep.item_margins) < 0


def test_verifier_rejects_cover_gap(circle_pair):
    cert = ExpandingCertificate((
        CertificateItem(Ball.of([0.0], 0.12), Word.of(1), 1.2),
    ))
    rep = verify_expanding(circle_pair, cert, grid_step=1e-3)
    assert not rep.valid
    assert not rep.cover.covers


def test_search_records_misses_when_target_unreachable():
    gens = (Rotation(np.sqrt(2) - 1), NorthSouth(1.5))
    res = search_certificate(gens, kappa_target=1.45, max_word_len=2,
                             grid_step=0.02)
    assert not res.found
    assert res.certificate is None
    assert len(res.best_table) > 0
    pt, word, co = res.best_table[0]
    assert co < 1.45 or isinstance(word, str)


def test_kappa_target_must_exceed_one(circle_pair):
    with pytest.raises(InputError):
        search_certificate(circle_pair, kappa_target=0.9)


def test_serialization_round_trip(circle_certificate):
    data = certificate_to_dict(circle_certificate)
    back = certificate_from_dict(data)
    assert back.kappa == pytest.approx(circle_certificate.kappa)
    assert len(back.items) == len(circle_certificate.items)
    for a, b in zip(back.items, circle_certificate.items):
        assert a.word == b.word
        assert a.ball.radius == pytest.approx(b.ball.radius)


def test_malformed_certificate_payload():
    with pytest.raises(InputError):
        certificate_from_dict({"items": [{"center": [0.0]}], "kappa": 1.3})


def test_robustness_budget_survives_perturbations(circle_pair,
                                                  circle_certificate):
    rr = robustness_radius(circle_pair, circle_certificate)
    assert rr.delta > 0
    rng = np.random.default_rng(17)
    for _ in range(5):
        pg = perturb_generators(circle_pair, 0.9 * rr.delta, rng)
        assert verify_expanding(pg, circle_certificate, grid_step=2e-3).valid


def test_group_mode_uses_inverses():
    # at word length 4 the forward semigroup cannot reach every point of
    # the circle with expansion, while inverse letters fill the gaps
    gens = (Rotation(np.sqrt(2) - 1), NorthSouth(1.0 / 4.0))
    fwd = search_certificate(gens, kappa_target=1.2, max_word_len=4,
                             grid_step=0.02)
    assert not fwd.found
    grp = search_certificate(gens, kappa_target=1.2, max_word_len=4,
                             grid_step=0.02, group_mode=True)
    assert grp.found
    assert any(inv for item in grp.certificate.items
               for _, inv in item.word.letters)
