"""Orbit density, certificate-driven amplification, and invariant-set scans.

Orbits are explored breadth-first over forward words, deduplicating points
at a quarter of the target density so the frontier stays finite.  A valid
expansion certificate then sharpens any eps-dense orbit to kappa^{-1} eps:
for a target y, the certificate ball containing a kappa^{-1} eps
neighbourhood of y names a word W expanding there; the inverse of W drags
an orbit point found near W(y) to within kappa^{-1} eps of y.
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .certificates import ExpandingCertificate
from .geometry import DomainError, InputError, Manifold, as_points
from .maps import Word, invert_word, word_map

__all__ = [
    "OrbitSample",
    "orbit_eps_density",
    "amplify_density",
    "invariant_arc_scan",
]


@dataclass(frozen=True)
class OrbitSample:
    base_point: tuple[float, ...]
    points: np.ndarray
    words: tuple[Word, ...]
    eps_target: float
    achieved_eps: float
    depth_reached: int
    eval_step: float


def _covering_radius(m: Manifold, pts: np.ndarray, eval_step: float) -> float:
    """Max over an evaluation grid of the distance to the nearest point."""
    grid = m.grid(eval_step)
    best = np.full(len(grid), np.inf)
    # chunk over stored points to bound memory
    for k in range(0, len(pts), 512):
        chunk = pts[k : k + 512]
        d = np.asarray(m.distance(grid[:, None, :], chunk[None, :, :]))
        best = np.minimum(best, d.min(axis=1))
    return float(np.max(best))


def orbit_eps_density(generators, x, eps_target: float, max_depth: int = 40,
                      eval_step: float | None = None) -> OrbitSample:
    """Forward-word breadth-first orbit exploration to target density.

    New points are kept only when farther than eps_target/4 from every
    stored point; words are recorded so each stored point reproduces as
    apply(word, x).  achieved_eps is the covering radius of the stored set
    over a fixed evaluation grid; exploration stops early once it reaches
    the target.
    """
    if eps_target <= 0:
        raise InputError("eps target must be positive")
    m = generators[0].manifold
    if eval_step is None:
        eval_step = eps_target / 4
    x0 = m.reduce(as_points(x))
    pts = [x0]
    words: list[Word] = [Word(())]
    sep = eps_target / 4
    frontier = [0]
    depth = 0
    achieved = _covering_radius(m, np.stack(pts), eval_step)
    while depth < max_depth and achieved > eps_target:
        depth += 1
        nxt = []
        arr = np.stack(pts)
        for idx in frontier:
            for gi, g in enumerate(generators):
                try:
                    cand = g.eval(pts[idx])
                except DomainError:
                    continue
                cand = m.reduce(cand)
                d = np.asarray(m.distance(arr, cand))
                if float(d.min()) <= sep:
                    continue
                pts.append(cand)
                words.append(words[idx] + Word(((gi, False),)))
                nxt.append(len(pts) - 1)
                arr = np.stack(pts)
        frontier = nxt
        achieved = _covering_radius(m, arr, eval_step)
        if not frontier:
            break
    return OrbitSample(
        base_point=tuple(map(float, x0)),
        points=np.stack(pts),
        words=tuple(words),
        eps_target=float(eps_target),
        achieved_eps=float(achieved),
        depth_reached=depth,
        eval_step=float(eval_step),
    )


def amplify_density(generators, cert: ExpandingCertificate, orbit: OrbitSample,
                    lebesgue_bound: float | None = None) -> OrbitSample:
    """One certificate round: shrink the covering radius by about kappa^{-1}.

    Preconditions: the orbit's achieved_eps must not exceed the cover's
    Lebesgue bound divided by kappa (pass the bound from the certificate's
    cover report), and every certificate word must be invertible.  For each
    evaluation grid target y the contracted neighbourhood B(y, kappa^{-1}
    eps) must fit inside some certificate ball; the word of that ball is
    inverted and applied to the orbit point nearest to word(y).
    """
    m = generators[0].manifold
    eps = orbit.achieved_eps
    if lebesgue_bound is not None and eps > lebesgue_bound / cert.kappa:
        raise InputError(
            f"orbit density {eps:.4g} too coarse for the certificate "
            f"(needs <= {lebesgue_bound / cert.kappa:.4g})"
        )
    handles = [word_map(generators, it.word) for it in cert.items]
    inv_handles = [h.inverse_map() for h in handles]
    targets = m.grid(orbit.eval_step)
    new_pts: list[np.ndarray] = []
    new_words: list[Word] = []
    for y in targets:
        item_idx = None
        for i, it in enumerate(cert.items):
            r_needed = eps / it.kappa_i
            if float(np.asarray(m.distance(y, it.ball.center_array))) + r_needed <= it.ball.radius:
                item_idx = i
                break
        if item_idx is None:
            raise InputError(
                f"no certificate ball holds the contracted neighbourhood of "
                f"{y.tolist()}; refine the orbit or the cover first"
            )
        z_star = handles[item_idx].eval(y)
        d = np.asarray(m.distance(orbit.points, z_star))
        p_idx = int(np.argmin(d))
        try:
            pulled = inv_handles[item_idx].eval(orbit.points[p_idx])
        except DomainError as err:
            raise InputError(
                f"certificate word {cert.items[item_idx].word} not applicable "
                f"near {z_star.tolist()}: {err}"
            ) from err
        new_pts.append(m.reduce(pulled))
        new_words.append(orbit.words[p_idx] + invert_word(cert.items[item_idx].word))
    pts = np.concatenate([orbit.points, np.stack(new_pts)], axis=0)
    words = orbit.words + tuple(new_words)
    achieved = _covering_radius(m, pts, orbit.eval_step)
    return OrbitSample(
        base_point=orbit.base_point,
        points=pts,
        words=words,
        eps_target=orbit.eps_target,
        achieved_eps=float(achieved),
        depth_reached=orbit.depth_reached,
        eval_step=orbit.eval_step,
    )


# ---------------------------------------------------------------------------
# invariant-set scans
# ---------------------------------------------------------------------------


def _scan_1d(generators, m: Manifold, grid_step: float, tol: float):
    grid = m.axis_grid(grid_step, 0)
    n = len(grid)
    images = []
    for g in generators:
        deriv = g.jac(grid[:, None])[..., 0, 0]
        if np.any(deriv <= 0):
            raise InputError("scan needs orientation-preserving generators")
        if not g.is_diffeo:
            raise InputError("scan needs injective generators")
        images.append(g.eval(grid[:, None])[:, 0])
    if m.is_quotient:
        lengths = np.mod(grid[None, :] - grid[:, None], 1.0)  # (start, end)
        ok = np.ones((n, n), dtype=bool)
        for img in images:
            # orientation-preserving, so the image of arc [a, b] is the
            # positively-oriented arc [f(a), f(b)]: it fits inside iff
            # f(a) sits in the arc and its span ends before the arc does
            off_a = np.mod(img - grid + tol, 1.0) - tol  # f(a) relative a
            span = np.mod(img[None, :] - img[:, None], 1.0)  # f(a) to f(b)
            ok &= off_a[:, None] + span <= lengths + tol
        ok &= lengths > grid_step / 2       # nondegenerate
        ok &= lengths < 1.0 - grid_step / 2  # proper
    else:
        a = grid[:, None]
        b = grid[None, :]
        lengths = b - a
        ok = lengths > grid_step / 2
        lo, hi = m.bounds[0]
        ok &= lengths < (hi - lo) - grid_step / 2
        for img in images:
            ok &= (img[:, None] >= a - tol) & (img[:, None] <= b + tol)
            ok &= (img[None, :] >= a - tol) & (img[None, :] <= b + tol)
    starts, ends = np.nonzero(ok)
    if len(starts) == 0:
        return []
    cand = sorted(
        zip(grid[starts], lengths[starts, ends]),
        key=lambda t: (-t[1], t[0]),
    )
    kept: list[tuple[float, float]] = []
    for a0, ln in cand:
        inside = False
        for a1, ln1 in kept:
            s = (a0 - a1) % 1.0 if m.is_quotient else a0 - a1
            if s >= -tol and s + ln <= ln1 + tol:
                inside = True
                break
        if not inside:
            kept.append((float(a0), float(ln)))
    out = []
    for a0, ln in kept:
        end = (a0 + ln) % 1.0 if m.is_quotient else a0 + ln
        out.append({"start": float(a0), "end": float(end), "length": float(ln)})
    return out


def _scan_2d(generators, m: Manifold, grid_step: float, tol: float):
    """Box scan via grid-point image ranges; a necessary-condition filter.

    Candidate boxes keep only those whose contained grid points map inside
    the box under every generator; the check runs on a coarsened grid
    (at most 24 nodes per axis), so treat hits as leads, not proofs.
    """
    axes = [m.axis_grid(grid_step, k) for k in range(2)]
    for k in range(2):
        if len(axes[k]) > 24:
            idx = np.unique(np.linspace(0, len(axes[k]) - 1, 24).astype(int))
            axes[k] = axes[k][idx]
    g1, g2 = axes
    n1, n2 = len(g1), len(g2)
    gx, gy = np.meshgrid(g1, g2, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    ranges = []
    for g in generators:
        img = g.eval(pts)
        u = img[:, 0].reshape(n1, n2)
        v = img[:, 1].reshape(n1, n2)
        ranges.append((u, v))

    def range_tables(arr):
        """minimum/maximum of arr over index boxes, shape (n1,n1,n2,n2)."""
        rmin = np.full((n1, n1, n2), np.inf)
        rmax = np.full((n1, n1, n2), -np.inf)
        for i1 in range(n1):
            rmin[i1, i1:] = np.minimum.accumulate(arr[i1:], axis=0)
            rmax[i1, i1:] = np.maximum.accumulate(arr[i1:], axis=0)
        cmin = np.full((n1, n1, n2, n2), np.inf)
        cmax = np.full((n1, n1, n2, n2), -np.inf)
        for i2 in range(n2):
            cmin[..., i2, i2:] = np.minimum.accumulate(rmin[..., i2:], axis=-1)
            cmax[..., i2, i2:] = np.maximum.accumulate(rmax[..., i2:], axis=-1)
        return cmin, cmax

    ok = np.zeros((n1, n1, n2, n2), dtype=bool)
    iu = np.triu_indices(n1, k=1)
    ju = np.triu_indices(n2, k=1)
    valid = np.zeros_like(ok)
    valid[iu[0][:, None, None], iu[1][:, None, None],
          ju[0][None, :, None], ju[1][None, :, None]] = True
    ok[...] = valid
    for u, v in ranges:
        umin, umax = range_tables(u)
        vmin, vmax = range_tables(v)
        lo1 = g1[:, None, None, None]
        hi1 = g1[None, :, None, None]
        lo2 = g2[None, None, :, None]
        hi2 = g2[None, None, None, :]
        ok &= (umin >= lo1 - tol) & (umax <= hi1 + tol)
        ok &= (vmin >= lo2 - tol) & (vmax <= hi2 + tol)
    # drop the full chart
    full = (np.ptp(g1),) + (np.ptp(g2),)
    hits = np.argwhere(ok)
    boxes = []
    for i1, j1, i2, j2 in hits:
        w, h = g1[j1] - g1[i1], g2[j2] - g2[i2]
        if w >= full[0] - tol and h >= full[1] - tol:
            continue
        boxes.append((float(g1[i1]), float(g1[j1]), float(g2[i2]), float(g2[j2])))
    boxes.sort(key=lambda b: (-(b[1] - b[0]) * (b[3] - b[2]), b))
    kept = []
    for b in boxes:
        inside = any(
            b[0] >= k[0] - tol and b[1] <= k[1] + tol
            and b[2] >= k[2] - tol and b[3] <= k[3] + tol
            for k in kept
        )
        if not inside:
            kept.append(b)
    return [
        {"lo": (b[0], b[2]), "hi": (b[1], b[3])}
        for b in kept
    ]


def invariant_arc_scan(generators, grid_step: float = 1e-3, tol: float = 1e-9):
    """All maximal proper grid arcs (1D) or boxes (2D, best effort) that
    every generator maps into themselves.

    In one dimension the criterion is exact for orientation-preserving
    injective maps: the image of [a, b] is the positively-oriented arc
    [f(a), f(b)], which sits inside [a, b] iff f(a) does and the image
    span ends before the arc does.  The two-dimensional variant filters
    boxes by grid-point images only and is diagnostic.
    """
    m = generators[0].manifold
    if m.dim == 1:
        return _scan_1d(generators, m, grid_step, tol)
    if m.kind == "torus2":
        raise InputError("2D scan supports box charts only")
    return _scan_2d(generators, m, grid_step, tol)
