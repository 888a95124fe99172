"""Contracting systems: attractors, invariant measures, distortion bounds.

Attractors are tracked as shrinking unions of grid boxes; measures as
normalized box histograms.  Everything that touches randomness takes an
explicit seed and splits it into a fixed number of independent streams, so
results depend only on the parameters, never on scheduling.
"""
from __future__ import annotations

from dataclasses import dataclass
import itertools
import math

import numpy as np
import scipy.sparse
import scipy.spatial

from .geometry import (Ball, Box, DomainError, InputError, Manifold,
                       diam_functionals)
from .maps import SmoothMap, Word, _singulars, word_map

__all__ = [
    "IFSystem",
    "BoxSet",
    "GridMeasure",
    "HutchinsonResult",
    "hutchinson_attractor",
    "ChaosResult",
    "chaos_game",
    "UlamResult",
    "ulam_stationary",
    "DistortionConstants",
    "distortion_constants",
    "DistortionOracle",
    "empirical_distortion",
    "VitaliReport",
    "vitali_check",
    "AcReport",
    "ac_diagnostic",
]


@dataclass(frozen=True)
class IFSystem:
    """Finitely many contractions acting on one manifold.

    beta must dominate every contraction ratio; it drives padding radii
    and error bounds downstream, so err on the large side.  probs, when
    given, are the letter probabilities of the associated Markov chain;
    the samplers require them.
    """

    maps: tuple[SmoothMap, ...]
    beta: float
    probs: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.maps:
            raise InputError("need at least one map")
        if not 0 < self.beta < 1:
            raise InputError("contraction bound must lie in (0, 1)")
        m = self.maps[0].manifold
        for f in self.maps:
            if f.manifold != m:
                raise InputError("all maps must share one manifold")
        if self.probs is not None:
            p = tuple(float(v) for v in self.probs)
            if len(p) != len(self.maps):
                raise InputError("probs length must match the map count")
            if any(v <= 0 for v in p):
                raise InputError("letter probabilities must be positive")
            if abs(sum(p) - 1.0) > 1e-12:
                raise InputError("letter probabilities must sum to 1")
            object.__setattr__(self, "probs", p)

    @property
    def manifold(self) -> Manifold:
        return self.maps[0].manifold

    def prob_array(self) -> np.ndarray:
        if self.probs is None:
            raise InputError("this operation needs letter probabilities "
                             "on the system")
        return np.asarray(self.probs, dtype=float)

    def validate(self, n_pairs: int = 20000, seed: int = 0) -> float:
        """Worst observed pairwise contraction ratio; must be <= beta."""
        m = self.manifold
        rng = np.random.default_rng(seed)
        a = m.random_points(rng, n_pairs)
        b = m.random_points(rng, n_pairs)
        base = np.asarray(m.distance(a, b))
        keep = base > 1e-12
        worst = 0.0
        for f in self.maps:
            fa = f.eval(a[keep])
            fb = f.eval(b[keep])
            if not (m.contains(fa) and m.contains(fb)):
                raise InputError("a map sends sample points outside the chart")
            d = np.asarray(m.distance(fa, fb))
            worst = max(worst, float(np.max(d / base[keep])))
        if worst > self.beta + 1e-9:
            raise InputError(
                f"observed contraction ratio {worst:.6f} exceeds declared "
                f"bound {self.beta}"
            )
        return worst


# ---------------------------------------------------------------------------
# grid containers
# ---------------------------------------------------------------------------


def _chart_bounds(m: Manifold) -> tuple[np.ndarray, np.ndarray]:
    if m.is_quotient:
        return np.zeros(m.dim), np.ones(m.dim)
    lo = np.array([b[0] for b in m.bounds], dtype=float)
    hi = np.array([b[1] for b in m.bounds], dtype=float)
    return lo, hi


@dataclass
class BoxSet:
    """Union of axis boxes on a regular grid over the manifold's chart."""

    manifold: Manifold
    res: int
    mask: np.ndarray

    def __post_init__(self):
        if self.res < 2:
            raise InputError("resolution must be at least 2")

    @classmethod
    def full(cls, m: Manifold, res: int) -> "BoxSet":
        return cls(m, res, np.ones((res,) * m.dim, dtype=bool))

    @property
    def widths(self) -> np.ndarray:
        lo, hi = _chart_bounds(self.manifold)
        return (hi - lo) / self.res

    @property
    def box_diam(self) -> float:
        return float(np.linalg.norm(self.widths))

    def count(self) -> int:
        return int(self.mask.sum())

    def volume(self) -> float:
        return self.count() * float(np.prod(self.widths))

    def box_indices(self, pts: np.ndarray) -> np.ndarray:
        lo, _ = _chart_bounds(self.manifold)
        idx = np.floor((np.atleast_2d(pts) - lo) / self.widths).astype(int)
        if self.manifold.is_quotient:
            idx %= self.res
        else:
            idx = np.clip(idx, 0, self.res - 1)
        return idx

    def centers(self) -> np.ndarray:
        lo, _ = _chart_bounds(self.manifold)
        idx = np.argwhere(self.mask)
        return lo + (idx + 0.5) * self.widths

    def box_samples(self) -> np.ndarray:
        """Corners and center of every active box, concatenated."""
        lo, _ = _chart_bounds(self.manifold)
        idx = np.argwhere(self.mask)
        w = self.widths
        dim = self.mask.ndim
        offs = [np.array(c, dtype=float) for c in
                itertools.product((0.0, 1.0), repeat=dim)]
        offs.append(np.full(dim, 0.5))
        parts = [lo + (idx + o) * w for o in offs]
        return np.concatenate(parts, axis=0)

    def contains(self, pts) -> np.ndarray:
        idx = self.box_indices(np.atleast_2d(np.asarray(pts, dtype=float)))
        return self.mask[tuple(idx.T)]

    def coarsen(self) -> "BoxSet":
        """Merge 2^dim sibling boxes by union; res must be even."""
        if self.res % 2:
            raise InputError("resolution must be even to coarsen")
        msk = self.mask
        for ax in range(msk.ndim):
            shape = list(msk.shape)
            shape[ax] //= 2
            shape.insert(ax + 1, 2)
            msk = msk.reshape(shape).any(axis=ax + 1)
        return BoxSet(self.manifold, self.res // 2, msk)

    def symmetric_difference(self, other: "BoxSet") -> int:
        if other.res != self.res:
            raise InputError("resolutions differ")
        return int(np.sum(self.mask ^ other.mask))

    def to_csv(self, path: str) -> None:
        idx = np.argwhere(self.mask)
        cen = self.centers()
        with open(path, "w") as fh:
            cols = ["i%d" % k for k in range(self.mask.ndim)]
            cols += ["x%d" % k for k in range(self.mask.ndim)]
            fh.write(",".join(cols) + "\n")
            for row, c in zip(idx, cen):
                cells = [str(int(v)) for v in row]
                cells += ["%.17g" % v for v in c]
                fh.write(",".join(cells) + "\n")

    def to_pgm(self, path: str) -> None:
        _write_pgm(path, self.mask.astype(float))


@dataclass
class GridMeasure:
    """Probability weights on the same regular box grid as BoxSet."""

    manifold: Manifold
    res: int
    weights: np.ndarray

    def __post_init__(self):
        s = float(self.weights.sum())
        if s <= 0:
            raise InputError("measure has no mass")
        if abs(s - 1.0) > 1e-9:
            self.weights = self.weights / s

    @classmethod
    def uniform(cls, m: Manifold, res: int) -> "GridMeasure":
        n = res ** m.dim
        return cls(m, res, np.full((res,) * m.dim, 1.0 / n))

    @classmethod
    def from_points(cls, m: Manifold, res: int, pts: np.ndarray) -> "GridMeasure":
        box = BoxSet.full(m, res)
        idx = box.box_indices(pts)
        flat = np.ravel_multi_index(tuple(idx.T), (res,) * m.dim)
        counts = np.bincount(flat, minlength=res ** m.dim).astype(float)
        return cls(m, res, counts.reshape((res,) * m.dim))

    @property
    def box_volume(self) -> float:
        lo, hi = _chart_bounds(self.manifold)
        return float(np.prod((hi - lo) / self.res))

    def l1_distance(self, other: "GridMeasure") -> float:
        if other.res != self.res:
            raise InputError("resolutions differ")
        return float(np.abs(self.weights - other.weights).sum())

    def coarsen(self) -> "GridMeasure":
        """Merge 2^dim sibling boxes; res must be even."""
        if self.res % 2:
            raise InputError("resolution must be even to coarsen")
        w = self.weights
        for ax in range(w.ndim):
            shape = list(w.shape)
            shape[ax] //= 2
            shape.insert(ax + 1, 2)
            w = w.reshape(shape).sum(axis=ax + 1)
        return GridMeasure(self.manifold, self.res // 2, w)

    def to_csv(self, path: str) -> None:
        res = self.res
        dim = self.weights.ndim
        lo, hi = _chart_bounds(self.manifold)
        widths = (hi - lo) / res
        with open(path, "w") as fh:
            cols = ["i%d" % k for k in range(dim)]
            cols += ["x%d" % k for k in range(dim)]
            cols.append("mass")
            fh.write(",".join(cols) + "\n")
            for flat, wgt in enumerate(self.weights.ravel()):
                idx = np.unravel_index(flat, self.weights.shape)
                cen = lo + (np.array(idx) + 0.5) * widths
                cells = [str(int(v)) for v in idx]
                cells += ["%.17g" % v for v in cen]
                cells.append("%.17g" % wgt)
                fh.write(",".join(cells) + "\n")

    def to_pgm(self, path: str) -> None:
        _write_pgm(path, self.weights)


def _write_pgm(path: str, field: np.ndarray) -> None:
    """8-bit binary PGM, grayscale by mass relative to the busiest box."""
    if field.ndim == 1:
        field = field[None, :]
    if field.ndim != 2:
        raise InputError("raster output needs a 1D or 2D field")
    top = float(field.max())
    scaled = np.zeros_like(field) if top <= 0 else field / top
    # image rows run top to bottom; grid rows run lo to hi on the last axis
    img = np.floor(255.0 * scaled.T[::-1]).clip(0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        fh.write(img.tobytes())


# ---------------------------------------------------------------------------
# attractor by shrinking box cover
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HutchinsonResult:
    boxes: BoxSet
    residual: int
    iterations: int
    counts: tuple[int, ...]
    converged: bool


def _dilation_offsets(widths: np.ndarray, radius: float) -> np.ndarray:
    reach = np.ceil(radius / widths).astype(int)
    axes = [np.arange(-r, r + 1) for r in reach]
    mesh = np.meshgrid(*axes, indexing="ij")
    offs = np.column_stack([a.ravel() for a in mesh])
    # keep offsets whose nearest displacement can still touch the ball
    slack = np.maximum(np.abs(offs) - 1, 0) * widths
    return offs[np.linalg.norm(slack, axis=1) <= radius]


def _sweep(system: IFSystem, cur: BoxSet, offs: np.ndarray) -> np.ndarray:
    """One application of the box-level union-of-images operator."""
    m = system.manifold
    res = cur.res
    samples = cur.box_samples()
    lo, hi = _chart_bounds(m)
    # scatter into a grid padded by the dilation radius so offset cells
    # never need bounds checks; the rim is folded or cropped afterwards
    pad = int(np.abs(offs).max())
    side = res + 2 * pad
    padded = np.zeros(side ** m.dim, dtype=bool)
    strides = side ** np.arange(m.dim - 1, -1, -1)
    deltas = offs @ strides
    for f in system.maps:
        img = f.eval(samples)
        if not m.is_quotient:
            inside = np.all((img >= lo) & (img <= hi), axis=1)
            img = img[inside]
        flat = (cur.box_indices(img) + pad) @ strides
        for d in deltas:
            padded[flat + d] = True
    grid = padded.reshape((side,) * m.dim)
    for ax in range(m.dim):
        sl = [slice(None)] * grid.ndim
        sl[ax] = slice(pad, pad + res)
        core = grid[tuple(sl)].copy()
        if m.is_quotient and pad:
            sl[ax] = slice(0, pad)
            rim_lo = grid[tuple(sl)]
            sl[ax] = slice(pad + res, side)
            rim_hi = grid[tuple(sl)]
            fold = [slice(None)] * grid.ndim
            fold[ax] = slice(res - pad, res)
            core[tuple(fold)] |= rim_lo
            fold[ax] = slice(0, pad)
            core[tuple(fold)] |= rim_hi
        grid = core
    return grid


def hutchinson_attractor(system: IFSystem, resolution: int,
                         max_iter: int | None = None) -> HutchinsonResult:
    """Outer cover of the attractor, refined until the box set is fixed.

    Starting from the full grid, each sweep replaces the cover with the
    union of images of active box corners and centers, outward-padded by
    beta * box diameter and intersected with the previous cover.  The
    padding keeps every sweep a true outer bound, so the limit contains
    the attractor.  residual counts the symmetric difference between the
    final set and one more operator application (0 means box-level
    invariance held exactly).
    """
    m = system.manifold
    cur = BoxSet.full(m, resolution)
    pad = system.beta * cur.box_diam
    offs = _dilation_offsets(cur.widths, pad)
    if max_iter is None:
        max_iter = int(math.ceil(
            10.0 * math.log(max(resolution, 2)) / math.log(1.0 / system.beta)
        ))
    counts = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        nxt = _sweep(system, cur, offs) & cur.mask
        delta = int(np.sum(cur.mask ^ nxt))
        cur = BoxSet(m, resolution, nxt)
        counts.append(cur.count())
        if delta == 0:
            converged = True
            break
    final_image = _sweep(system, cur, offs)
    residual = int(np.sum(final_image ^ cur.mask))
    return HutchinsonResult(cur, residual, it, tuple(counts), converged)


# ---------------------------------------------------------------------------
# chaos game
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChaosResult:
    measure: GridMeasure
    stream_measures: tuple[GridMeasure, ...]
    streams: int
    burn_in: int
    points: np.ndarray | None = None


def chaos_game(system: IFSystem, n_samples: int, resolution: int,
               burn_in: int = 64, seed: int = 0, streams: int = 8,
               keep_points: bool = False) -> ChaosResult:
    """Random-orbit histogram of the stationary chain, reproducible streams.

    The seed is split into `streams` independent generators whose
    histograms add, so the result depends only on (seed, streams) and
    never on how the work is scheduled.  Letters are drawn iid from the
    system's probabilities.
    """
    if n_samples < 10_000:
        raise InputError("stationary sampling needs at least 1e4 samples")
    p = system.prob_array()
    m = system.manifold
    k = len(system.maps)
    per_stream = -(-n_samples // streams)
    batch = min(2048, per_stream)
    length = burn_in + -(-per_stream // batch)
    lo, hi = _chart_bounds(m)
    seqs = np.random.SeedSequence(seed).spawn(streams)
    shape = (resolution,) * m.dim
    stream_hists = []
    collected = [] if keep_points else None
    locator = BoxSet.full(m, resolution)
    for sq in seqs:
        rng = np.random.Generator(np.random.PCG64(sq))
        letters = rng.choice(k, size=(length, batch), p=p)
        x = np.tile((lo + hi) / 2, (batch, 1))
        x = x + (hi - lo) * 1e-3 * rng.random((batch, m.dim))
        hist = np.zeros(resolution ** m.dim, dtype=np.int64)
        taken = 0
        kept_pts = []
        for step in range(length):
            nxt = np.empty_like(x)
            for i, f in enumerate(system.maps):
                sel = letters[step] == i
                if not np.any(sel):
                    continue
                try:
                    nxt[sel] = f.eval(x[sel])
                except DomainError as err:
                    raise InputError(
                        f"chaos game left the chart under map {i}: {err}"
                    ) from err
            x = m.reduce(nxt)
            if step >= burn_in:
                take = min(batch, per_stream - taken)
                pts = x[:take]
                idx = locator.box_indices(pts)
                flat = np.ravel_multi_index(tuple(idx.T), shape)
                hist += np.bincount(flat, minlength=resolution ** m.dim)
                if keep_points:
                    kept_pts.append(pts.copy())
                taken += take
                if taken >= per_stream:
                    break
        stream_hists.append(hist)
        if keep_points:
            collected.append(np.concatenate(kept_pts, axis=0))
    # per-stream counts round n_samples up to a streams multiple; the
    # normalized histogram is what downstream consumers read
    total = np.sum(stream_hists, axis=0).astype(float)
    meas = GridMeasure(m, resolution, total.reshape(shape))
    stream_meas = tuple(
        GridMeasure(m, resolution, h.astype(float).reshape(shape))
        for h in stream_hists
    )
    pts_out = None
    if keep_points:
        pts_out = np.concatenate(collected, axis=0)[:n_samples]
    return ChaosResult(meas, stream_meas, streams, burn_in, pts_out)


# ---------------------------------------------------------------------------
# transfer-operator discretization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UlamResult:
    measure: GridMeasure
    residual: float
    iterations: int
    # filled only when power iteration oscillates between two vectors
    second_measure: GridMeasure | None = None


def ulam_stationary(system: IFSystem, resolution: int,
                    samples_per_axis: int = 32, tol: float = 1e-10,
                    max_iter: int = 20000) -> UlamResult:
    """Stationary measure of the letter-iid Markov chain on the box grid.

    Each box is sampled on a regular interior lattice; images vote into
    target boxes, building a sparse row-stochastic matrix.  The fixed
    vector comes from power iteration; residual is the stationarity gap
    ||mu - sum_i p_i (h_i)_* mu||_1 of the returned vector on the grid.
    """
    p = system.prob_array()
    m = system.manifold
    dim = m.dim
    box = BoxSet.full(m, resolution)
    lo, _ = _chart_bounds(m)
    w = box.widths
    s = samples_per_axis
    offs_ax = [(np.arange(s) + 0.5) / s * w[a] for a in range(dim)]
    mesh = np.meshgrid(*offs_ax, indexing="ij")
    offsets = np.column_stack([a.ravel() for a in mesh])  # (s^dim, dim)
    n_boxes = resolution ** dim
    idx_all = np.stack(
        np.unravel_index(np.arange(n_boxes), (resolution,) * dim), axis=1
    )
    corners = lo + idx_all * w  # (n_boxes, dim)
    rows, cols, data = [], [], []
    ns = len(offsets)
    for i, f in enumerate(system.maps):
        pts = (corners[:, None, :] + offsets[None, :, :]).reshape(-1, dim)
        img = f.eval(pts)
        tgt = box.box_indices(img)
        flat = np.ravel_multi_index(tuple(tgt.T), (resolution,) * dim)
        rows.append(np.repeat(np.arange(n_boxes), ns))
        cols.append(flat)
        data.append(np.full(n_boxes * ns, p[i] / ns))
    mat = scipy.sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_boxes, n_boxes),
    ).tocsr()
    mu = np.full(n_boxes, 1.0 / n_boxes)
    prev = None
    second = None
    for it in range(1, max_iter + 1):
        nxt = mat.T @ mu
        nxt /= nxt.sum()
        step = float(np.abs(nxt - mu).sum())
        if prev is not None and step >= tol:
            if float(np.abs(nxt - prev).sum()) < tol:
                # period-two stagnation: report both accumulation vectors
                second = GridMeasure(m, resolution,
                                     mu.reshape((resolution,) * dim))
                mu = nxt
                break
        prev = mu
        mu = nxt
        if step < tol:
            break
    residual = float(np.abs(mu - mat.T @ mu).sum())
    meas = GridMeasure(m, resolution, mu.reshape((resolution,) * dim))
    return UlamResult(meas, residual, it, second)


# ---------------------------------------------------------------------------
# distortion constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistortionConstants:
    """Closed-form distortion bounds with their defining parameters."""

    L_H: float
    K_H: float
    alpha: float
    C: float
    kappa: float
    K: float

    def __post_init__(self):
        if not (self.L_H >= 1.0 and np.isfinite(self.L_H)):
            raise InputError("upper distortion constant must be finite and >= 1")
        if not (0.0 < self.K_H <= 1.0):
            raise InputError("roundness constant must lie in (0, 1]")


def distortion_constants(alpha: float, C: float, kappa: float,
                         K: float) -> DistortionConstants:
    """Derivative-ratio and roundness constants from Hoelder data.

    Along a word of contractions with rates <= 1/kappa the scale of the
    j-th step shrinks like K * kappa^(-j), so the Hoelder increments of
    log-derivative sum to the geometric series
        series = C * K^alpha * q / (1 - q),   q = kappa^(-alpha).
    L_H = exp(series) bounds every ratio |det Dh_w(x) / det Dh_w(y)|;
    K_H applies the same series to the log conformal factor, giving the
    lower roundness bound diaminf >= K_H * diamsup for images of balls.
    """
    if not 0 < alpha <= 1:
        raise InputError("Hoelder exponent must lie in (0, 1]")
    if C < 0:
        raise InputError("Hoelder constant must be nonnegative")
    if kappa <= 1:
        raise InputError("expansion factor must exceed 1")
    if K <= 0:
        raise InputError("scale bound must be positive")
    q = kappa ** (-alpha)
    series = C * K ** alpha * q / (1.0 - q)
    return DistortionConstants(
        L_H=float(np.exp(series)),
        K_H=float(np.exp(-series)),
        alpha=float(alpha),
        C=float(C),
        kappa=float(kappa),
        K=float(K),
    )


@dataclass(frozen=True)
class DistortionOracle:
    sup_det_ratio: float
    sup_roundness_ratio: float
    words_checked: int
    pairs_per_word: int
    ball: Ball


def _cloud_diams(m: Manifold, pts: np.ndarray) -> tuple[float, float]:
    d = diam_functionals(m, pts)
    return d["diamsup"], d["diaminf"]


def _solid_ball(ball: Ball, dim: int, n: int) -> tuple[np.ndarray, float]:
    """Sample points filling the ball, plus their typical spacing."""
    c = ball.center_array
    r = ball.radius
    if dim == 1:
        t = np.linspace(-1.0, 1.0, n)
        return c + r * t[:, None], 2 * r / (n - 1)
    # sunflower layout: near-uniform area coverage of the disk
    i = np.arange(n) + 0.5
    rad = r * np.sqrt(i / n)
    ang = i * np.pi * (3.0 - np.sqrt(5.0))
    pts = c + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    return pts, r * np.sqrt(np.pi / n)


def empirical_distortion(maps, depth: int, n_pairs: int = 200,
                         seed: int = 0, ball: Ball | None = None,
                         ball_samples: int | None = None) -> DistortionOracle:
    """Brute-force sup of derivative ratios and image-roundness ratios.

    Enumerates every word up to the given length.  Per word: the sup of
    |det Dh_w(x) / det Dh_w(y)| over seeded point pairs, and the ratio
    diamsup/diaminf of the image of a reference ball.  Both are the
    quantities the closed-form constants bound, so oracle <= bound is the
    testable inequality.  Grows combinatorially; keep depth small.
    """
    if depth < 1:
        raise InputError("need at least word length 1")
    m = maps[0].manifold
    rng = np.random.default_rng(seed)
    xs = m.random_points(rng, n_pairs)
    ys = m.random_points(rng, n_pairs)
    if ball is None:
        lo, hi = _chart_bounds(m)
        center = (lo + hi) / 2
        radius = 0.45 * float(np.min(hi - lo)) / 2 if not m.is_quotient else 0.2
        ball = Ball.of(center, radius)
    if ball_samples is None:
        ball_samples = 2048 if m.dim == 1 else 16384
    solid, spacing = _solid_ball(ball, m.dim, ball_samples)
    diam_base = 2 * ball.radius
    worst_det = 1.0
    worst_round = 1.0
    words = 0
    k = len(maps)
    for length in range(1, depth + 1):
        for letters in itertools.product(range(k), repeat=length):
            word = Word(tuple((i, False) for i in letters))
            handle = word_map(maps, word)
            try:
                _, _, det_x = _singulars(handle.jac(xs))
                _, _, det_y = _singulars(handle.jac(ys))
                img = handle.eval(solid)
            except DomainError as err:
                raise InputError(
                    f"word {word} leaves the chart on sampled points: {err}"
                ) from err
            ratio = np.abs(det_x) / np.abs(det_y)
            if np.any(~np.isfinite(ratio)) or np.any(ratio <= 0):
                raise InputError(f"singular derivative along word {word}")
            worst_det = max(worst_det, float(ratio.max()),
                            float((1.0 / ratio).max()))
            # the inscribed-ball probe needs a tolerance matched to the
            # sample spacing after the word has rescaled it; a bounding-box
            # proxy for the image diameter is accurate enough for that
            rel = m.displacement(np.broadcast_to(img[:1], img.shape), img)
            scale = float(np.linalg.norm(np.ptp(rel, axis=0)))
            tol_w = 4.0 * spacing * max(scale / diam_base, 1e-12)
            d = diam_functionals(m, img, tol=tol_w)
            if d["diaminf"] > 0:
                worst_round = max(worst_round, d["diamsup"] / d["diaminf"])
            words += 1
    return DistortionOracle(
        sup_det_ratio=worst_det,
        sup_roundness_ratio=worst_round,
        words_checked=words,
        pairs_per_word=n_pairs,
        ball=ball,
    )


# ---------------------------------------------------------------------------
# covering-family regularity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VitaliReport:
    c_vitali: float
    worst_word: Word
    per_depth: tuple[float, ...]
    growth: float
    v_regular: bool
    shrinking_cover_ok: bool
    cover_failures: int
    deltas: tuple[float, ...]
    excluded: int
    resolution: int


def _cloud_diameter(pts: np.ndarray) -> float:
    if pts.shape[1] == 1:
        return float(pts.max() - pts.min())
    if len(pts) > 16:
        hull = scipy.spatial.ConvexHull(pts)
        pts = pts[hull.vertices]
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=-1)).max())


def vitali_check(system: IFSystem, depth: int = 4,
                 attractor: BoxSet | None = None, resolution: int = 128,
                 growth_tol: float = 0.05) -> VitaliReport:
    """Shape regularity of the attractor's word images.

    Each word image V inherits a grid volume (occupied boxes) and a
    diameter (image point cloud); c_vitali is the worst (diam V)^d / vol.
    Geometric growth of the per-depth maxima flags anisotropy that breaks
    covering arguments.  The shrinking-cover side checks that every
    attractor box meets some image of diameter <= delta for each dyadic
    delta reachable at this depth; images with zero grid volume are
    excluded and counted.
    """
    if attractor is None:
        attractor = hutchinson_attractor(system, resolution).boxes
    if attractor.count() == 0:
        raise InputError("attractor is empty at this resolution; "
                         "regularity is vacuous at this scale")
    m = system.manifold
    dim = m.dim
    res = attractor.res
    samples = attractor.box_samples()
    box_vol = float(np.prod(attractor.widths))
    shape = (res,) * dim
    per_word: list[tuple[Word, float, float]] = []  # word, diam, vol
    excluded = 0
    k = len(system.maps)
    for length in range(0, depth + 1):
        for letters in itertools.product(range(k), repeat=length):
            word = Word(tuple((i, False) for i in letters))
            handle = word_map(system.maps, word)
            img = handle.eval(samples)
            idx = attractor.box_indices(img)
            mask = np.zeros(shape, dtype=bool)
            mask[tuple(idx.T)] = True
            vol = int(mask.sum()) * box_vol
            if vol <= 0:
                excluded += 1
                continue
            per_word.append((word, _cloud_diameter(img), vol))
    if not per_word:
        raise InputError("every word image vanished at grid resolution")
    ratios = [(w, d ** dim / v) for w, d, v in per_word]
    worst = max(ratios, key=lambda t: t[1])
    per_depth = []
    for length in range(1, depth + 1):
        vals = [r for w, r in ratios if len(w.letters) == length]
        if vals:
            per_depth.append(max(vals))
    growth = per_depth[-1] / per_depth[-2] if len(per_depth) > 1 else 1.0

    # shrinking-cover property on dyadic scales reachable at this depth
    min_diam = min(d for _, d, _ in per_word)
    deltas = []
    j = 0
    while 2.0 ** (-j) >= min_diam and j < 60:
        deltas.append(2.0 ** (-j))
        j += 1
    centers_idx = np.argwhere(attractor.mask)
    flat_centers = np.ravel_multi_index(tuple(centers_idx.T), shape)
    failures = 0
    for delta in deltas:
        covered = np.zeros(res ** dim, dtype=bool)
        for (word, d, _v) in per_word:
            if d > delta:
                continue
            handle = word_map(system.maps, word)
            img = handle.eval(samples)
            idx = attractor.box_indices(img)
            mask = np.zeros(shape, dtype=bool)
            mask[tuple(idx.T)] = True
            covered |= mask.ravel()
        failures += int(np.sum(~covered[flat_centers]))
    return VitaliReport(
        c_vitali=float(worst[1]),
        worst_word=worst[0],
        per_depth=tuple(per_depth),
        growth=float(growth),
        v_regular=bool(growth <= 1.0 + growth_tol),
        shrinking_cover_ok=failures == 0,
        cover_failures=failures,
        deltas=tuple(deltas),
        excluded=excluded,
        resolution=res,
    )


# ---------------------------------------------------------------------------
# absolute-continuity diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AcReport:
    verdict: str
    frac_null_on_delta: float
    mass_outside_delta: float
    occupancy_fractions: tuple[float, ...]
    trend_ratio: float
    null_boxes: tuple[tuple[int, ...], ...]
    tau_low: float


def ac_diagnostic(mu: GridMeasure, attractor: BoxSet,
                  tau_low: float = 0.01, levels: int = 3) -> AcReport:
    """Which side of the equivalent-or-singular dichotomy the data favors.

    Computes the fraction of attractor boxes whose mu-mass falls below
    tau_low of the uniform mass (Lebesgue-positive but mu-null
    candidates) and the mu-mass outside the attractor.  The attractor's
    occupancy fraction across dyadic coarsenings gives the trend ratio:
    a geometric decay of occupied fraction means the support is thinning
    toward Lebesgue measure zero.  Verdicts: singular-leaning when the
    trend decays, equivalent-on-delta when both defect fractions are
    under 1%, else inconclusive.  A diagnostic, not a proof.
    """
    if mu.res != attractor.res or mu.manifold != attractor.manifold:
        raise InputError("measure and attractor must share one partition")
    n_total = mu.res ** mu.weights.ndim
    uniform_mass = 1.0 / n_total
    n_delta = attractor.count()
    if n_delta == 0:
        raise InputError("attractor has no boxes")
    on_delta = mu.weights[attractor.mask]
    null_flags = on_delta < tau_low * uniform_mass
    frac_null = float(np.mean(null_flags))
    mass_outside = float(mu.weights[~attractor.mask].sum())

    fractions = []
    cur = attractor
    for _ in range(levels):
        fractions.append(cur.count() / cur.res ** cur.mask.ndim)
        if cur.res % 2:
            break
        cur = cur.coarsen()
    ratios = [fractions[i] / fractions[i + 1]
              for i in range(len(fractions) - 1) if fractions[i + 1] > 0]
    trend = float(np.exp(np.mean(np.log(ratios)))) if ratios else 1.0

    if trend <= 0.9:
        verdict = "singular-leaning"
    elif frac_null < 0.01 and mass_outside < 0.01:
        verdict = "equivalent-on-delta"
    else:
        verdict = "inconclusive"

    idx_delta = np.argwhere(attractor.mask)
    null_idx = idx_delta[null_flags][:64]
    return AcReport(
        verdict=verdict,
        frac_null_on_delta=frac_null,
        mass_outside_delta=mass_outside,
        occupancy_fractions=tuple(float(f) for f in fractions),
        trend_ratio=trend,
        null_boxes=tuple(tuple(int(v) for v in row) for row in null_idx),
        tau_low=tau_low,
    )
