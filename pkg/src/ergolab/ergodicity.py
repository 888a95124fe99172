"""Random-orbit statistics and ergodicity diagnostics.

A random orbit draws iid letters and walks a single point while tracking
the stepwise log derivative norms.  The rate and envelope fitted to the
co-norm track are the empirical counterparts of an expansion certificate
along the realized word; the remaining tools compare time to space
averages, integrate log-Jacobians against volume, probe density ratios of
box sets, and saturate a region under inverse images.
"""
from __future__ import annotations

from dataclasses import dataclass
import itertools
import math

import numpy as np
import scipy.signal

from .geometry import Ball, Box, DomainError, InputError, Manifold
from .ifs import BoxSet, GridMeasure, _chart_bounds, _dilation_offsets
from .maps import Word, _singulars, word_map

__all__ = [
    "RandomOrbitStats",
    "random_orbit_stats",
    "JensenReport",
    "jensen_diagnostic",
    "BirkhoffReport",
    "birkhoff_test",
    "DensityReport",
    "density_ball_probe",
    "SaturationResult",
    "pullback_saturate",
]


def _letter_probabilities(k: int, probs) -> np.ndarray:
    p = np.full(k, 1.0 / k) if probs is None else np.asarray(probs, float)
    if len(p) != k or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise InputError("letter probabilities must form a probability vector")
    return p


# ---------------------------------------------------------------------------
# single random orbit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RandomOrbitStats:
    """Derivative growth along one realized random word.

    The three sum arrays hold cumulative stepwise logs, entry k covering
    the first k steps.  prefix_min[k] is the worst shortfall of the
    co-norm track below its fitted line among the first k prefixes, so
    exp(prefix_min[n]) is the envelope constant certified by the whole
    orbit.
    """

    seed: int
    n: int
    x0: np.ndarray
    word: np.ndarray
    log_co_sums: np.ndarray
    log_op_sums: np.ndarray
    log_det_sums: np.ndarray
    prefix_min: np.ndarray
    rho: float
    c_omega: float
    nue_average: float
    temperedness_slope: float

    def replay_residual(self, generators) -> float:
        """Worst mismatch against recomputing the sums from the word."""
        other = _walk_word(generators, self.x0, self.word)
        return float(max(
            np.abs(other[0] - self.log_co_sums).max(),
            np.abs(other[1] - self.log_op_sums).max(),
            np.abs(other[2] - self.log_det_sums).max(),
        ))

    def to_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("k,letter,log_co_sum,log_op_sum,log_det_sum,prefix_min\n")
            for k in range(self.n + 1):
                letter = "" if k == 0 else str(int(self.word[k - 1]))
                fh.write("%d,%s,%.17g,%.17g,%.17g,%.17g\n" % (
                    k, letter, self.log_co_sums[k], self.log_op_sums[k],
                    self.log_det_sums[k], self.prefix_min[k]))


def _walk_word(generators, x0: np.ndarray, word: np.ndarray):
    """Cumulative log norms of the stepwise derivative along a fixed word."""
    m = generators[0].manifold
    n = len(word)
    co = np.zeros(n + 1)
    op = np.zeros(n + 1)
    det = np.zeros(n + 1)
    state = np.array(x0, dtype=float)[None, :]
    for k, letter in enumerate(word):
        g = generators[int(letter)]
        j = g.jac(state)
        o, c, d = _singulars(j)
        if not (np.isfinite(c) and c > 0 and abs(float(d)) > 0):
            raise InputError(f"derivative singular at orbit step {k}")
        co[k + 1] = co[k] + math.log(float(c))
        op[k + 1] = op[k] + math.log(float(o))
        det[k + 1] = det[k] + math.log(abs(float(d)))
        try:
            state = g.eval(state)
        except DomainError as err:
            raise InputError(
                f"orbit left the chart at step {k} under map {int(letter)}: {err}"
            ) from err
        state = m.reduce(state)
    return co, op, det


def random_orbit_stats(generators, probs, x, n: int, seed: int = 0) -> RandomOrbitStats:
    """Expansion statistics of a single orbit with iid random letters.

    Fits rate and intercept by least squares over the whole prefix track
    of cumulative log co-norms, not just the endpoint: the envelope
    constant is defined by an inequality over every prefix, so all of
    them carry information.  nue_average is the Cesaro mean of
    log ||(Df)^-1|| at the orbit points, negative when the orbit average
    expands.  temperedness_slope regresses prefix_min[k]/k on k and
    should vanish for tempered envelopes.
    """
    if n < 1000:
        raise InputError("orbit statistics need at least 1000 steps")
    k = len(generators)
    p = _letter_probabilities(k, probs)
    rng = np.random.default_rng(seed)
    word = rng.choice(k, size=n, p=p).astype(np.int8)
    x0 = np.asarray(x, dtype=float).reshape(-1)
    co, op, det = _walk_word(generators, x0, word)
    ks = np.arange(n + 1, dtype=float)
    slope, intercept = np.polyfit(ks, co, 1)
    detrended = co - (slope * ks + intercept)
    prefix_min = np.minimum.accumulate(np.minimum(detrended, 0.0))
    inner = prefix_min[1:] / ks[1:]
    temper = float(np.polyfit(ks[1:], inner, 1)[0])
    return RandomOrbitStats(
        seed=seed,
        n=n,
        x0=x0,
        word=word,
        log_co_sums=co,
        log_op_sums=op,
        log_det_sums=det,
        prefix_min=prefix_min,
        rho=float(slope),
        c_omega=float(np.exp(intercept)),
        nue_average=float(-co[n] / n),
        temperedness_slope=temper,
    )


# ---------------------------------------------------------------------------
# volume average of log-Jacobians
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JensenReport:
    """Volume integrals of log |det Df| per generator and per word.

    For any diffeomorphism of a closed manifold the integral of |det Df|
    is 1, so the integral of its log is <= 0 with equality only in the
    volume-preserving case.  all_nonpositive records whether every value
    clears that bar within the quadrature tolerance.
    """

    per_map: tuple[float, ...]
    words: tuple[Word, ...]
    per_word: tuple[float, ...]
    tolerance: float
    all_nonpositive: bool


def _midpoint_grid(m: Manifold, quadrature_points: int):
    per_axis = max(2, int(round(quadrature_points ** (1.0 / m.dim))))
    axes = [(np.arange(per_axis) + 0.5) / per_axis for _ in range(m.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([a.ravel() for a in mesh])
    return pts, per_axis


def _quadrature(handle, pts: np.ndarray, per_axis: int, dim: int):
    _, _, det = _singulars(handle.jac(pts))
    det = np.abs(det)
    if np.any(det <= 0) or np.any(~np.isfinite(det)):
        raise InputError("degenerate Jacobian in volume average")
    vals = np.log(det)
    cell = per_axis ** (-dim)
    value = float(vals.sum() * cell)
    # composite midpoint error via second differences of the integrand
    grid = vals.reshape((per_axis,) * dim)
    err = 1e-12
    for ax in range(dim):
        d2 = np.diff(grid, 2, axis=ax)
        err += float(np.abs(d2).sum()) * cell / 24.0
    return value, err


def jensen_diagnostic(generators, quadrature_points: int,
                      words=None) -> JensenReport:
    """Midpoint quadrature of log |det Df| against normalized volume.

    Requires diffeomorphisms of a compact quotient; chart contractions
    are rejected since the defining identity integrates over a closed
    manifold.  Words default to every two-letter composition.
    """
    m = generators[0].manifold
    if not m.is_quotient:
        raise InputError("volume averages need a compact quotient")
    for g in generators:
        if not g.is_diffeo:
            raise InputError("volume averages need diffeomorphisms")
    pts, per_axis = _midpoint_grid(m, quadrature_points)
    per_map = []
    tol = 0.0
    for g in generators:
        v, e = _quadrature(g, pts, per_axis, m.dim)
        per_map.append(v)
        tol = max(tol, e)
    if words is None:
        idx = range(len(generators))
        words = [Word.of(i, j) for i, j in itertools.product(idx, repeat=2)]
    per_word = []
    for w in words:
        handle = word_map(generators, w)
        v, e = _quadrature(handle, pts, per_axis, m.dim)
        per_word.append(v)
        tol = max(tol, e)
    values = per_map + per_word
    return JensenReport(
        per_map=tuple(per_map),
        words=tuple(words),
        per_word=tuple(per_word),
        tolerance=float(tol),
        all_nonpositive=bool(max(values) <= tol),
    )


# ---------------------------------------------------------------------------
# time averages against a reference measure
# ---------------------------------------------------------------------------


def _observable_from_tag(tag: dict, m: Manifold):
    """Resolve a family tag to (name, callable, discretization bound)."""
    if not isinstance(tag, dict) or "type" not in tag:
        raise InputError("observable tags are dicts with a 'type' key")
    kind = tag["type"]
    lo, hi = _chart_bounds(m)
    if kind in ("cos", "sin"):
        extra = set(tag) - {"type", "axis", "freq"}
        if extra:
            raise InputError(f"unknown observable keys {sorted(extra)}")
        axis = int(tag.get("axis", 0))
        freq = int(tag.get("freq", 1))
        if not (0 <= axis < m.dim) or freq < 1:
            raise InputError("observable axis or frequency out of range")
        span = hi[axis] - lo[axis]
        base = np.cos if kind == "cos" else np.sin
        name = f"{kind}{freq}_ax{axis}"

        def phi(pts, a=axis, f=freq, b=base, o=lo[axis], s=span):
            return b(2.0 * np.pi * f * (pts[..., a] - o) / s)

        def disc_tol(mu: GridMeasure, a=axis, f=freq, s=span):
            w = (hi[a] - lo[a]) / mu.res
            return float(np.pi * f * w / s)

        return name, phi, disc_tol
    if kind == "box":
        extra = set(tag) - {"type", "lo", "hi"}
        if extra:
            raise InputError(f"unknown observable keys {sorted(extra)}")
        blo = np.atleast_1d(np.asarray(tag["lo"], dtype=float))
        bhi = np.atleast_1d(np.asarray(tag["hi"], dtype=float))
        if blo.shape != (m.dim,) or bhi.shape != (m.dim,) or np.any(blo >= bhi):
            raise InputError("box observable needs lo < hi per axis")
        name = "box_" + "_".join("%g:%g" % ab for ab in zip(blo, bhi))

        def phi(pts, a=blo, b=bhi):
            return np.all((pts >= a) & (pts <= b), axis=-1).astype(float)

        def disc_tol(mu: GridMeasure, a=blo, b=bhi):
            # mass of the grid boxes straddling the indicator's boundary
            res = mu.res
            w = (hi - lo) / res
            edges_lo = lo + np.arange(res)[:, None] * w
            edges_hi = edges_lo + w
            strads = []
            for ax in range(m.dim):
                cell_lo = edges_lo[:, ax]
                cell_hi = edges_hi[:, ax]
                inside = (cell_lo >= a[ax] - 1e-12) & (cell_hi <= b[ax] + 1e-12)
                outside = (cell_hi <= a[ax] + 1e-12) | (cell_lo >= b[ax] - 1e-12)
                strads.append((inside, outside))
            shape = (res,) * m.dim
            interior = np.ones(shape, dtype=bool)
            exterior = np.zeros(shape, dtype=bool)
            for ax, (ins, outs) in enumerate(strads):
                sl = [None] * m.dim
                sl[ax] = slice(None)
                interior &= ins[tuple(sl)]
                exterior |= outs[tuple(sl)]
            straddle = ~(interior | exterior)
            return float(mu.weights[straddle].sum())

        return name, phi, disc_tol
    raise InputError(f"unknown observable type {kind!r}")


@dataclass(frozen=True)
class BirkhoffReport:
    """Per-(seed, observable) deviations of time from space averages."""

    rows: tuple[tuple[int, str, float, float, float], ...]
    observables: tuple[str, ...]
    space_averages: tuple[float, ...]
    mean_deviation: tuple[float, ...]
    max_deviation: tuple[float, ...]
    thresholds: tuple[float, ...]
    per_observable_pass: tuple[bool, ...]
    passed: bool
    n: int
    n_seeds: int

    def to_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("seed,observable,time_average,space_average,deviation\n")
            for seed, name, tavg, savg, dev in self.rows:
                fh.write("%d,%s,%.17g,%.17g,%.17g\n" %
                         (seed, name, tavg, savg, dev))


def birkhoff_test(generators, probs, mu_ref: GridMeasure, observables,
                  n: int, n_seeds: int, seed: int = 0, x0=None,
                  burn_in: int = 64) -> BirkhoffReport:
    """Compare orbit time averages with integrals against a reference.

    Each seed runs its own letter stream; deviations aggregate over
    seeds in seed order.  The pass threshold per observable is three
    standard errors of the time average, with the asymptotic variance
    estimated by batch means to absorb orbit autocorrelation, plus the
    discretization error of the reference integral.
    """
    m = generators[0].manifold
    k = len(generators)
    p = _letter_probabilities(k, probs)
    w = np.asarray(mu_ref.weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise InputError("reference measure must be a probability measure")
    if mu_ref.manifold != m:
        raise InputError("reference measure lives on a different manifold")
    resolved = [_observable_from_tag(t, m) for t in observables]
    names = [r[0] for r in resolved]
    centers = BoxSet.full(m, mu_ref.res).centers()
    space = [float(np.dot(np.asarray(phi(centers), dtype=float),
                          w.ravel())) for _, phi, _ in resolved]
    disc = [tolfn(mu_ref) for _, _, tolfn in resolved]

    batch = max(1, int(math.isqrt(n)))
    n_batches = n // batch
    # one letter stream and start point per seed, stepped side by side
    total_steps = burn_in + n
    letters = np.empty((total_steps, n_seeds), dtype=np.int64)
    states = np.empty((n_seeds, m.dim))
    for s in range(n_seeds):
        rng = np.random.default_rng((seed, s))
        letters[:, s] = rng.choice(k, size=total_steps, p=p)
        if x0 is None:
            states[s] = m.random_points(rng, 1)[0]
        else:
            states[s] = np.asarray(x0, dtype=float).reshape(-1)
    totals = np.zeros((len(resolved), n_seeds))
    batch_sums = np.zeros((len(resolved), n_batches, n_seeds))
    for step in range(total_steps):
        row = letters[step]
        nxt = np.empty_like(states)
        for i, g in enumerate(generators):
            sel = row == i
            if not np.any(sel):
                continue
            try:
                nxt[sel] = g.eval(states[sel])
            except DomainError as err:
                raise InputError(
                    f"orbit left the chart at step {step} under map {i}: "
                    f"{err}") from err
        states = m.reduce(nxt)
        t = step - burn_in
        if t < 0:
            continue
        b = t // batch
        for i, (_, phi, _) in enumerate(resolved):
            v = np.asarray(phi(states), dtype=float)
            totals[i] += v
            if b < n_batches:
                batch_sums[i, b] += v
    tavg = totals / n
    var_est = np.zeros((len(resolved), n_seeds))
    if n_batches > 1:
        means = batch_sums / batch
        var_est = batch * means.var(axis=1, ddof=1)
    rows = []
    devs = np.zeros((len(resolved), n_seeds))
    for s in range(n_seeds):
        for i, name in enumerate(names):
            dev = abs(tavg[i, s] - space[i])
            devs[i, s] = dev
            rows.append((s, name, float(tavg[i, s]), space[i], float(dev)))

    thresholds = []
    flags = []
    for i in range(len(resolved)):
        sigma = math.sqrt(max(var_est[i].mean(), 0.0) / n)
        thr = 3.0 * sigma + disc[i]
        thresholds.append(float(thr))
        flags.append(bool(devs[i].max() <= thr))
    return BirkhoffReport(
        rows=tuple(rows),
        observables=tuple(names),
        space_averages=tuple(space),
        mean_deviation=tuple(float(d) for d in devs.mean(axis=1)),
        max_deviation=tuple(float(d) for d in devs.max(axis=1)),
        thresholds=tuple(thresholds),
        per_observable_pass=tuple(flags),
        passed=bool(all(flags)),
        n=n,
        n_seeds=n_seeds,
    )


# ---------------------------------------------------------------------------
# density-point ball probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DensityReport:
    """Best ball of one radius by fill ratio inside a box set."""

    ball: Ball
    fill_ratio: float
    radius: float
    threshold: float
    hits: np.ndarray
    density_points: np.ndarray


def _ball_kernel(widths: np.ndarray, radius: float) -> np.ndarray:
    offs = _dilation_offsets(widths, radius)
    keep = np.linalg.norm(offs * widths, axis=1) <= radius
    offs = offs[keep]
    reach = np.abs(offs).max(axis=0)
    kernel = np.zeros(tuple(2 * reach + 1))
    kernel[tuple((offs + reach).T)] = 1.0
    return kernel


def _count_convolve(mask: np.ndarray, kernel: np.ndarray,
                    wrap: bool) -> np.ndarray:
    if wrap:
        shape = mask.shape
        padded = np.zeros(shape)
        # center the kernel at the origin with wraparound
        idx = np.argwhere(kernel > 0) - np.array(kernel.shape) // 2
        padded[tuple((idx % np.array(shape)).T)] = 1.0
        out = np.fft.irfftn(np.fft.rfftn(mask.astype(float)) *
                            np.fft.rfftn(padded), s=shape)
    else:
        out = scipy.signal.fftconvolve(mask.astype(float), kernel,
                                       mode="same")
    return np.rint(out).astype(int)


def density_ball_probe(A: BoxSet, radius: float,
                       threshold: float = 0.99) -> DensityReport:
    """Scan all grid balls of one radius for the best fill ratio.

    The ball is the union of boxes whose centers it contains; fills are
    exact box counts via convolution, so the scan is deterministic.
    Balls sticking out of a non-quotient chart count the outside as
    empty.  density_points flags boxes whose quarter-radius
    neighborhood already clears the threshold.
    """
    m = A.manifold
    widths = A.widths
    if radius < 2.0 * float(widths.max()):
        raise InputError("ball radius must span at least two boxes")
    if not 0 < threshold <= 1:
        raise InputError("threshold must lie in (0, 1]")
    kernel = _ball_kernel(widths, radius)
    counts = _count_convolve(A.mask, kernel, m.is_quotient)
    total = int(kernel.sum())
    fill = counts / total
    best_flat = int(np.argmax(fill))
    best_idx = np.unravel_index(best_flat, fill.shape)
    lo, _ = _chart_bounds(m)
    center = lo + (np.array(best_idx) + 0.5) * widths
    hit_idx = np.argwhere(fill >= threshold)
    hits = lo + (hit_idx + 0.5) * widths

    quarter = max(radius / 4.0, float(widths.max()) * 1.0001)
    qkernel = _ball_kernel(widths, quarter)
    qfill = _count_convolve(A.mask, qkernel, m.is_quotient) / qkernel.sum()
    cand_idx = np.argwhere(qfill >= threshold)
    cands = lo + (cand_idx + 0.5) * widths
    return DensityReport(
        ball=Ball.of(center, radius),
        fill_ratio=float(fill[best_idx]),
        radius=float(radius),
        threshold=float(threshold),
        hits=hits,
        density_points=cands,
    )


# ---------------------------------------------------------------------------
# saturation under inverse images
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SaturationResult:
    boxes: BoxSet
    coverage: float
    iterations: int
    converged: bool


def pullback_saturate(generators, seed_region, res: int, max_iter: int = 64,
                      within: BoxSet | None = None) -> SaturationResult:
    """Grow a region by inverse images until the box cover stops changing.

    Active box centers are pulled back through every generator inverse;
    results are padded by the inverse's Lipschitz reach so the cover only
    ever overshoots.  coverage is the active fraction of `within` when
    given, of the whole grid otherwise.
    """
    m = generators[0].manifold
    inverses = []
    pads = []
    probe = BoxSet.full(m, res)
    half = probe.box_diam / 2.0
    for g in generators:
        if not g.is_diffeo:
            raise InputError("saturation needs invertible generators")
        inv = g.inverse_map()
        inverses.append(inv)
        pads.append(inv.sup_op_norm() * half + half)
    if within is not None and within.res != res:
        raise InputError("within region must share the resolution")
    mask = np.zeros((res,) * m.dim, dtype=bool)
    cen_all = probe.centers()
    if isinstance(seed_region, BoxSet):
        if seed_region.res != res:
            raise InputError("seed region must share the resolution")
        mask |= seed_region.mask
    elif isinstance(seed_region, (Ball, Box)):
        inside = np.asarray(seed_region.margin(m, cen_all)) >= 0
        mask[tuple(probe.box_indices(cen_all[inside]).T)] = True
    else:
        raise InputError("seed region must be a ball, a box, or a box set")
    if not mask.any():
        raise InputError("seed region grabs no boxes at this resolution")
    cur = BoxSet(m, res, mask)

    def _coverage(b: BoxSet) -> float:
        if within is None:
            return b.count() / res ** m.dim
        hit = int(np.sum(b.mask & within.mask))
        return hit / max(within.count(), 1)

    lo, hi = _chart_bounds(m)
    for it in range(max_iter):
        nxt = cur.mask.copy()
        centers = cur.centers()
        for inv, pad in zip(inverses, pads):
            offs = _dilation_offsets(cur.widths, pad)
            try:
                img = inv.eval(centers)
            except DomainError:
                continue
            img = m.reduce(img)
            if not m.is_quotient:
                ok = np.all((img >= lo) & (img <= hi), axis=1)
                img = img[ok]
            base = cur.box_indices(img)
            for o in offs:
                cells = base + o
                if m.is_quotient:
                    cells %= res
                else:
                    good = np.all((cells >= 0) & (cells < res), axis=1)
                    cells = cells[good]
                nxt[tuple(cells.T)] = True
        delta = int(np.sum(nxt ^ cur.mask))
        cur = BoxSet(m, res, nxt)
        if delta == 0:
            return SaturationResult(cur, _coverage(cur), it + 1, True)
    return SaturationResult(cur, _coverage(cur), max_iter, False)
