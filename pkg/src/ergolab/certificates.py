"""Finite expansion certificates: verification, search, robustness.

A certificate is a finite list of (ball, word, kappa_i): on each ball the
named word must expand every direction by at least kappa_i, measured by the
co-norm m(D) = 1/|D^{-1}|, and the balls must cover the space.  In two
dimensions the verifier accumulates stepwise co-norms along the word, which
lower-bounds the co-norm of the composite; the verdict stays conservative.
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .geometry import (Ball, Cover, CoverReport, DomainError, InputError,
                       Manifold, verify_cover)
from .maps import Word, _letter_map, _singulars, word_map

__all__ = [
    "CertificateItem",
    "ExpandingCertificate",
    "CertificateReport",
    "SearchResult",
    "RobustnessReport",
    "verify_expanding",
    "search_certificate",
    "robustness_radius",
    "certificate_to_dict",
    "certificate_from_dict",
]


@dataclass(frozen=True)
class CertificateItem:
    ball: Ball
    word: Word
    kappa_i: float


@dataclass(frozen=True)
class ExpandingCertificate:
    items: tuple[CertificateItem, ...]
    kappa: float | None = None

    def __post_init__(self):
        if not self.items:
            raise InputError("certificate needs at least one item")
        if self.kappa is None:
            object.__setattr__(self, "kappa",
                               min(i.kappa_i for i in self.items))
        if self.kappa <= 1.0:
            raise InputError("certificate kappa must exceed 1")

    @property
    def cover(self) -> Cover:
        return Cover(tuple(i.ball for i in self.items))


@dataclass(frozen=True)
class CertificateReport:
    valid: bool
    margin: float
    slack: float
    cover: CoverReport
    item_margins: tuple[float, ...]
    failures: tuple[str, ...]


def _word_conorms(generators, word: Word, pts: np.ndarray) -> np.ndarray:
    """Product of stepwise co-norms along the word, vectorized over pts."""
    cache: dict[int, object] = {}
    acc = np.ones(len(pts))
    cur = pts
    for letter in word.letters:
        mp = _letter_map(generators, letter, cache)
        j = mp.jac(cur)
        _, co, _ = _singulars(j)
        acc = acc * co
        cur = mp.eval(cur)
    return acc


def _grid_gap(m: Manifold, step: float) -> float:
    """Farthest a ball point can sit from the nearest ball-grid sample.

    One dimension keeps the rim samples, so half a spacing; in two the
    nearest in-ball sample may live a cell away from a rim sliver.
    """
    return step / 2.0 if m.dim == 1 else step * np.sqrt(m.dim)


def verify_expanding(generators, cert: ExpandingCertificate,
                     grid_step: float = 1e-3) -> CertificateReport:
    """Check the covering and the per-ball expansion inequalities on grids.

    margin is the smallest excess co-norm over kappa_i across all grid
    samples; each ball also gets a slack bounding how far the co-norm can
    dip between its grid samples, from the word's declared log-derivative
    Lipschitz constant.  valid requires the cover to hold and every
    ball's margin to exceed its own slack, so the inequality holds off
    the grid as well.
    """
    m = generators[0].manifold
    cover_rep = verify_cover(m, cert.cover, grid_step)
    gap = _grid_gap(m, grid_step)
    margins = []
    slacks = []
    failures = []
    for idx, item in enumerate(cert.items):
        pts = item.ball.grid(m, grid_step)
        if len(pts) == 0:
            failures.append(f"item {idx}: empty ball grid")
            margins.append(float("-inf"))
            slacks.append(0.0)
            continue
        try:
            conorms = _word_conorms(generators, item.word, pts)
        except (DomainError, InputError) as err:
            failures.append(f"item {idx}: {err}")
            margins.append(float("-inf"))
            slacks.append(0.0)
            continue
        gmin = float(np.min(conorms))
        margins.append(gmin - item.kappa_i)
        lip = word_map(generators, item.word).log_deriv_lipschitz()
        slacks.append(gmin * float(-np.expm1(-lip * gap)))
    margin = min(margins)
    slack = max(slacks) if slacks else 0.0
    valid = (cover_rep.covers and not failures
             and all(mg > sl for mg, sl in zip(margins, slacks)))
    return CertificateReport(
        valid=valid,
        margin=margin,
        slack=slack,
        cover=cover_rep,
        item_margins=tuple(margins),
        failures=tuple(failures),
    )


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchResult:
    found: bool
    certificate: ExpandingCertificate | None
    # per uncovered start point: (point, best word, best co-norm)
    best_table: tuple[tuple[tuple[float, ...], str, float], ...]


def _bfs_expanding_word(generators, start: np.ndarray, kappa_target: float,
                        max_word_len: int, cell: float, group_mode: bool):
    """Smallest word whose stepwise co-norm product reaches kappa_target.

    States are (point, log co-norm sum) rooted at ``start``; per spatial
    cell only the best running sum survives, which keeps the frontier small.
    Letters are tried in index order, inverses (group mode) after the
    forward letters, so ties resolve lexicographically.
    """
    m = generators[0].manifold
    letters = [(i, False) for i in range(len(generators))]
    if group_mode:
        letters += [(i, True) for i in range(len(generators)) if generators[i].is_diffeo]
    cache: dict[int, object] = {}
    target = np.log(kappa_target)

    def cell_key(pt):
        return tuple(np.floor(np.asarray(pt) / cell).astype(int).tolist())

    frontier = [(start, 0.0, ())]
    best: dict[tuple, float] = {cell_key(start): 0.0}
    best_any = (0.0, ())
    for _ in range(max_word_len):
        nxt = []
        for pt, logc, word in frontier:
            for letter in letters:
                mp = _letter_map(generators, letter, cache)
                try:
                    j = mp.jac(pt)
                    _, co, _ = _singulars(j[None, ...].reshape(1, m.dim, m.dim))
                    npt = mp.eval(pt)
                except (DomainError, InputError):
                    continue
                if co[0] <= 0:
                    continue
                nlog = logc + float(np.log(co[0]))
                nword = word + (letter,)
                if nlog >= target:
                    return Word(nword)
                if nlog > best_any[0]:
                    best_any = (nlog, nword)
                key = cell_key(npt)
                if best.get(key, -np.inf) >= nlog:
                    continue
                best[key] = nlog
                nxt.append((npt, nlog, nword))
        frontier = nxt
        if not frontier:
            break
    return (float(np.exp(best_any[0])), Word(best_any[1]))


def _grow_ball(generators, m: Manifold, center: np.ndarray, word: Word,
               kappa_target: float, grid_step: float) -> Ball | None:
    """Largest ball around center keeping min co-norm >= kappa_target.

    Doubling finds an upper bracket, then bisection narrows the radius to
    1e-4.  The grid minimum must clear the target by the worst possible
    dip between grid points, so the bound holds on the whole ball, not
    just the sample points.  Returns None when even the smallest ball
    fails.
    """
    cap = 0.499 if m.is_quotient else m.diameter()
    # certify on a finer pitch than the search walks, so the dip margin
    # stays affordable even for words with a steep log-derivative
    fine = grid_step / 4.0
    dip = float(np.exp(word_map(generators, word).log_deriv_lipschitz()
                       * _grid_gap(m, fine)))

    def ok(r):
        ball = Ball.of(center, r)
        pts = ball.grid(m, fine)
        if len(pts) == 0:
            return False
        try:
            conorms = _word_conorms(generators, word, pts)
        except (DomainError, InputError):
            return False
        return bool(np.min(conorms) >= kappa_target * dip)

    # prefer a roomy start, but accept any radius that still makes
    # covering progress at this grid pitch
    for r in (4.0 * grid_step, 2.0 * grid_step, 1.5 * grid_step):
        if ok(r):
            break
    else:
        return None
    while 2.0 * r <= cap and ok(2.0 * r):
        r *= 2.0
    lo, hi = r, min(2.0 * r, cap)
    if ok(hi):
        return Ball.of(center, hi)
    while hi - lo > 1e-4:
        mid = (lo + hi) / 2.0
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return Ball.of(center, lo)


def _certify_point(generators, m, p, kappa_target: float, max_word_len: int,
                   grid_step: float, group_mode: bool, known_words):
    """Word plus verified ball at p, else (None, best word, best co).

    Known words are tried first.  When the grown ball fails, the point
    search reruns with escalating at-point targets: a word with slack at
    the center tends to keep expanding on a wider ball.
    """
    for w in known_words:
        try:
            co = _word_conorms(generators, w, p[None, :])
        except (DomainError, InputError):
            continue
        if co[0] >= kappa_target:
            ball = _grow_ball(generators, m, p, w, kappa_target, grid_step)
            if ball is not None:
                return ball, w, kappa_target
    last = None
    for mult in (1.0, 1.5, 2.25):
        res = _bfs_expanding_word(generators, p, kappa_target * mult,
                                  max_word_len, grid_step, group_mode)
        if not isinstance(res, Word):
            if last is None:
                best_co, best_word = res
                return None, best_word, best_co
            break  # raising the target further only loses words
        last = res
        ball = _grow_ball(generators, m, p, res, kappa_target, grid_step)
        if ball is not None:
            return ball, res, kappa_target
    return None, last, kappa_target


def search_certificate(generators, kappa_target: float, max_word_len: int = 8,
                       grid_step: float = 1e-2,
                       group_mode: bool = False) -> SearchResult:
    """Greedy cover construction from per-point expanding words.

    Walks the ambient grid in order; at each uncovered point finds a word by
    breadth-first search, grows the largest verified ball around the point,
    and adds it to the cover.  Lowering kappa_target only makes the word
    search easier, so a found target stays found.
    """
    if kappa_target <= 1.0:
        raise InputError("kappa target must exceed 1")
    m = generators[0].manifold
    grid = m.grid(grid_step)
    covered = np.zeros(len(grid), dtype=bool)
    items: list[CertificateItem] = []
    misses: list[tuple[tuple[float, ...], str, float]] = []
    known_words: list[Word] = []
    while not np.all(covered):
        idx = int(np.argmin(covered))
        p = grid[idx]
        ball, word, co = _certify_point(generators, m, p, kappa_target,
                                        max_word_len, grid_step, group_mode,
                                        known_words)
        if ball is None:
            misses.append((tuple(float(v) for v in p), str(word), co))
            covered[idx] = True  # keep scanning to fill the table
            continue
        if word not in known_words:
            known_words.append(word)
        pts_d = m.distance(grid, ball.center_array)
        covered |= pts_d <= ball.radius - grid_step
        covered[idx] = True
        fine = grid_step / 4.0
        dip = float(np.exp(word_map(generators, word).log_deriv_lipschitz()
                           * _grid_gap(m, fine)))
        kappa_i = float(np.min(_word_conorms(generators, word,
                                             ball.grid(m, fine)))) / dip
        items.append(CertificateItem(ball=ball, word=word, kappa_i=kappa_i))
    if misses:
        return SearchResult(False, None, tuple(misses))
    cert = ExpandingCertificate(tuple(items))
    return SearchResult(True, cert, ())


# ---------------------------------------------------------------------------
# robustness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RobustnessReport:
    delta: float
    margin: float
    lambda_max: float


def robustness_radius(generators, cert: ExpandingCertificate,
                      grid_step: float = 1e-3) -> RobustnessReport:
    """C^1 perturbation budget delta = surplus / (2 lambda_max).

    lambda_max bounds the sensitivity of a word's co-norm to a C^1 change
    of the letters: for a word with stepwise derivative sups S_1..S_n it is
    sum_j prod_{i != j} S_i (an empty product is 1, so a single letter has
    sensitivity 1).  The surplus is the worst item margin net of that
    item's between-grid-points slack, so within distance delta every
    strict inequality of the certificate survives on the same balls.
    """
    m = generators[0].manifold
    rep = verify_expanding(generators, cert, grid_step)
    gap = _grid_gap(m, grid_step)
    surplus = float("inf")
    for item, mg in zip(cert.items, rep.item_margins):
        lip = word_map(generators, item.word).log_deriv_lipschitz()
        gmin = mg + item.kappa_i
        surplus = min(surplus, mg - gmin * float(-np.expm1(-lip * gap)))
    lam_max = 0.0
    cache: dict[int, object] = {}
    for item in cert.items:
        sups = [
            _letter_map(generators, letter, cache).sup_op_norm()
            for letter in item.word.letters
        ]
        n = len(sups)
        total = 0.0
        for j in range(n):
            prod = 1.0
            for i in range(n):
                if i != j:
                    prod *= sups[i]
            total += prod
        lam_max = max(lam_max, total if n else 1.0)
    lam_max = max(lam_max, 1.0)
    delta = max(surplus, 0.0) / (2.0 * lam_max)
    return RobustnessReport(delta=delta, margin=rep.margin, lambda_max=lam_max)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def certificate_to_dict(cert: ExpandingCertificate) -> dict:
    """Stable field order: items (center, radius, word, kappa_i), kappa."""
    return {
        "items": [
            {
                "center": [float(v) for v in it.ball.center],
                "radius": float(it.ball.radius),
                "word": [[int(i), bool(inv)] for i, inv in it.word.letters],
                "kappa_i": float(it.kappa_i),
            }
            for it in cert.items
        ],
        "kappa": float(cert.kappa),
    }


def certificate_from_dict(data: dict) -> ExpandingCertificate:
    try:
        items = tuple(
            CertificateItem(
                ball=Ball.of(it["center"], it["radius"]),
                word=Word(tuple((int(i), bool(inv)) for i, inv in it["word"])),
                kappa_i=float(it["kappa_i"]),
            )
            for it in data["items"]
        )
        return ExpandingCertificate(items=items, kappa=float(data["kappa"]))
    except (KeyError, TypeError) as err:
        raise InputError(f"malformed certificate payload: {err}") from err
