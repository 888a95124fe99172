"""Blending regions, covering cycles, and symbolic coding of points.

A blending region is an open set B with a safety neighbourhood D and a
finite list of contraction words whose images of B cover B again (weakly)
or cover its closure (strictly).  The covering lets one code any point of B
by an infinite word; truncations land within beta^n diam(B).  Cycles
globalize the region: forward words pull every point of the space into B,
and images of B under invertible words reach every point.
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .geometry import Ball, Box, DomainError, InputError, Manifold, as_points
from .maps import Word, word_map

__all__ = [
    "BlendingRegion",
    "BlendingReport",
    "CycleWitness",
    "CodingResult",
    "CodingError",
    "verify_blending",
    "find_cycle",
    "code_point",
    "region_words_maps",
]

Region = Ball | Box


class CodingError(ValueError):
    """The pullback recursion lost membership; carries the level reached."""

    def __init__(self, level: int, message: str):
        super().__init__(message)
        self.level = level


@dataclass(frozen=True)
class BlendingRegion:
    B: Region
    D: Region
    maps: tuple[Word, ...]
    beta: float
    K: float | None = None  # optional distortion bound carried with the region

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise InputError("contraction rate beta must lie in (0, 1)")
        if not self.maps:
            raise InputError("blending region needs at least one word")

    def diam_B(self) -> float:
        return self.B.diam() if isinstance(self.B, Box) else 2.0 * self.B.radius


def _region_grid(region: Region, m: Manifold, step: float) -> np.ndarray:
    if isinstance(region, Box):
        return region.grid(m, step)
    # ball closure grid, boundary included
    c = region.center_array
    r = region.radius
    axes = []
    for k in range(len(c)):
        n = max(2, int(np.ceil(2 * r / step)))
        axes.append(c[k] - r + np.arange(n + 1) * (2 * r / n))
    if len(c) == 1:
        pts = axes[0][:, None]
    else:
        gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
    pts = m.reduce(pts)
    return pts[np.asarray(m.distance(pts, c)) <= r]


def region_words_maps(generators, region: BlendingRegion):
    """Resolve the region's words to composed map handles."""
    return [word_map(generators, w) for w in region.maps]


@dataclass(frozen=True)
class BlendingReport:
    ok: bool
    mode: str
    covering_ok: bool
    covering_worst: tuple[float, tuple[float, ...]]
    contraction_ok: bool
    contraction_worst: tuple[float, tuple[float, ...], tuple[float, ...]]
    containment_ok: bool
    containment_worst: tuple[float, tuple[float, ...]]


def verify_blending(generators, region: BlendingRegion, mode: str = "strict",
                    grid_step: float = 1e-3, n_pairs: int = 100_000,
                    seed: int = 0) -> BlendingReport:
    """Check the three conditions of a blending region on grids and samples.

    (a) covering: strict mode certifies every point of closure(B); weak mode
        certifies the interior at boundary margin >= grid_step.  Both go
        through the pullback test margin_B(word^{-1} x) > 0 with off-grid
        slack sup|D word^{-1}| * grid_step/2 (the grid's covering radius);
    (b) contraction: d(h x, h y) <= beta d(x, y) on seeded sample pairs
        from closure(D);
    (c) containment: images of closure(D) stay strictly inside D.

    Worst witnesses carry the tightest margin and where it happened.
    """
    if mode not in ("strict", "weak"):
        raise InputError(f"unknown mode {mode!r}")
    m = generators[0].manifold
    handles = region_words_maps(generators, region)
    inverses = [h.inverse_map() for h in handles]

    # (a) covering through pullbacks
    pts = _region_grid(region.B, m, grid_step)
    if mode == "weak":
        # keep every grid point that can serve a target with margin >=
        # grid_step; dropping more would orphan claim points near the cut
        margins_b = np.asarray(region.B.margin(m, pts))
        pts = pts[margins_b >= grid_step / 2]
    best = np.full(len(pts), -np.inf)
    for h, hinv in zip(handles, inverses):
        slack = hinv.sup_op_norm() * grid_step / 2
        try:
            z = hinv.eval(pts)
        except DomainError:
            continue
        best = np.maximum(best, np.asarray(region.B.margin(m, z)) - slack)
    worst_idx = int(np.argmin(best)) if len(pts) else 0
    covering_ok = bool(np.all(best > 0)) if len(pts) else False
    covering_worst = (
        float(best[worst_idx]) if len(pts) else float("-inf"),
        tuple(float(v) for v in pts[worst_idx]) if len(pts) else (),
    )

    # (b) contraction on sampled pairs of closure(D)
    rng = np.random.default_rng(seed)
    if isinstance(region.D, Box):
        xs = region.D.sample(rng, n_pairs)
        ys = region.D.sample(rng, n_pairs)
    else:
        xs = region.D.sample(m, rng, n_pairs)
        ys = region.D.sample(m, rng, n_pairs)
    base = np.asarray(m.distance(xs, ys))
    keep = base > 1e-12
    xs, ys, base = xs[keep], ys[keep], base[keep]
    worst_ratio = 0.0
    worst_pair = ((), ())
    contraction_ok = True
    for h in handles:
        hx = h.eval(xs)
        hy = h.eval(ys)
        ratio = np.asarray(m.distance(hx, hy)) / base
        i = int(np.argmax(ratio))
        if float(ratio[i]) > worst_ratio:
            worst_ratio = float(ratio[i])
            worst_pair = (tuple(map(float, xs[i])), tuple(map(float, ys[i])))
        if worst_ratio > region.beta + 1e-9:
            contraction_ok = False
    contraction_worst = (worst_ratio, *worst_pair)

    # (c) containment of the images of closure(D)
    dpts = _region_grid(region.D, m, grid_step)
    containment_ok = True
    containment_worst = (float("inf"), ())
    for h in handles:
        img = h.eval(dpts)
        margins = np.asarray(region.D.margin(m, img))
        i = int(np.argmin(margins))
        if float(margins[i]) < containment_worst[0]:
            containment_worst = (float(margins[i]), tuple(map(float, dpts[i])))
        if float(margins[i]) <= 0:
            containment_ok = False

    return BlendingReport(
        ok=covering_ok and contraction_ok and containment_ok,
        mode=mode,
        covering_ok=covering_ok,
        covering_worst=covering_worst,
        contraction_ok=contraction_ok,
        contraction_worst=contraction_worst,
        containment_ok=containment_ok,
        containment_worst=containment_worst,
    )


# ---------------------------------------------------------------------------
# cycles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CycleWitness:
    found: bool
    T_words: tuple[Word, ...]
    S_words: tuple[Word, ...]
    t_residual: tuple[tuple[float, ...], ...]
    s_residual: tuple[tuple[float, ...], ...]


def _enumerate_words(n_generators: int, max_len: int):
    """All words by length then lexicographically, starting with the empty word."""
    yield Word(())
    frontier = [()]
    for _ in range(max_len):
        nxt = []
        for w in frontier:
            for i in range(n_generators):
                ww = w + ((i, False),)
                yield Word(ww)
                nxt.append(ww)
        frontier = nxt


def find_cycle(generators, region: BlendingRegion, max_word_len: int = 8,
               grid_step: float = 1e-2) -> CycleWitness:
    """Greedy search for forward words pulling the space into B (T side)
    and words whose images of B reach every point (S side).

    The T side covers x when some word W has W(x) in B; the S side covers x
    when W^{-1}(x) lands in B, which tests x in W(B) for invertible words.
    Words are scanned by length then lexicographic order; a word joins the
    list when it covers at least one point not yet covered.
    """
    m = generators[0].manifold
    grid = m.grid(grid_step)
    n = len(grid)
    t_cov = np.zeros(n, dtype=bool)
    s_cov = np.zeros(n, dtype=bool)
    t_words: list[Word] = []
    s_words: list[Word] = []
    invertible = all(g.is_diffeo for g in generators)
    for word in _enumerate_words(len(generators), max_word_len):
        done_t = bool(np.all(t_cov))
        done_s = bool(np.all(s_cov))
        if done_t and done_s:
            break
        handle = word_map(generators, word)
        if not done_t:
            try:
                img = handle.eval(grid)
                margin = np.asarray(region.B.margin(m, img))
                hit = margin > handle.sup_op_norm() * grid_step
            except DomainError:
                hit = np.zeros(n, dtype=bool)
            if np.any(hit & ~t_cov):
                t_cov |= hit
                t_words.append(word)
        if not done_s and invertible:
            hinv = handle.inverse_map()
            try:
                z = hinv.eval(grid)
                margin = np.asarray(region.B.margin(m, z))
                hit = margin > hinv.sup_op_norm() * grid_step
            except DomainError:
                hit = np.zeros(n, dtype=bool)
            if np.any(hit & ~s_cov):
                s_cov |= hit
                s_words.append(word)
    found = bool(np.all(t_cov)) and bool(np.all(s_cov))
    t_res = tuple(tuple(map(float, p)) for p in grid[~t_cov][:32])
    s_res = tuple(tuple(map(float, p)) for p in grid[~s_cov][:32])
    return CycleWitness(found, tuple(t_words), tuple(s_words), t_res, s_res)


# ---------------------------------------------------------------------------
# coding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CodingResult:
    digits: tuple[int, ...]
    word: Word
    final_point: tuple[float, ...] | None
    error_bound: float
    distance: float | None
    pullbacks: tuple[tuple[float, ...], ...]


def code_point(generators, region: BlendingRegion, x, n: int, y=None,
               tol: float = 1e-9) -> CodingResult:
    """Code x in B by n digits via the pullback recursion.

    At each level the smallest digit i with word_i^{-1}(current) still in B
    is taken; the composite word (outermost digit first) contracts B, so any
    y in B satisfies d(word(y), x) <= beta^n diam(B).  Digits are ordered
    outermost first; the returned word applies them to y in the correct
    dynamical order (innermost letter first).
    """
    m = generators[0].manifold
    x = as_points(x)
    if float(np.asarray(region.B.margin(m, x))) < -tol:
        raise InputError(f"point {x.tolist()} lies outside the coding region")
    handles = region_words_maps(generators, region)
    inverses = [h.inverse_map() for h in handles]
    z = x.copy()
    digits: list[int] = []
    pullbacks = [tuple(map(float, z))]
    for level in range(1, n + 1):
        chosen = None
        for i, hinv in enumerate(inverses):
            try:
                cand = hinv.eval(z)
            except DomainError:
                continue
            if float(np.asarray(region.B.margin(m, cand))) >= -tol:
                chosen = (i, cand)
                break
        if chosen is None:
            raise CodingError(
                level, f"pullback membership failed at level {level}"
            )
        digits.append(chosen[0])
        z = chosen[1]
        pullbacks.append(tuple(map(float, z)))
    # word applies innermost digit first
    letters = []
    for i in reversed(digits):
        letters.extend(region.maps[i].letters)
    word = Word(tuple(letters))
    bound = region.beta ** n * region.diam_B()
    final = None
    dist = None
    if y is not None:
        fy = word_map(generators, word).eval(as_points(y))
        final = tuple(map(float, fy))
        dist = float(np.asarray(m.distance(fy, x)))
    return CodingResult(
        digits=tuple(digits),
        word=word,
        final_point=final,
        error_bound=float(bound),
        distance=dist,
        pullbacks=tuple(pullbacks),
    )
