"""Phase spaces and metric primitives.

Three spaces are supported: the circle R/Z, the flat two-torus (R/Z)^2, and
rectangular box charts with the Euclidean metric.  Quotient coordinates live
in the fundamental domain [0,1)^dim; distances on quotients take the shortest
representative.  All coordinate data is plain float64 ndarray of shape
(..., dim) so the same code paths serve single points and grids.
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np

__all__ = [
    "DomainError",
    "InputError",
    "Manifold",
    "Ball",
    "Box",
    "Cover",
    "CoverReport",
    "distance",
    "verify_cover",
    "diam_functionals",
]


class DomainError(ValueError):
    """A point left the region where a map or chart is defined."""


class InputError(ValueError):
    """Malformed user input, as opposed to a check that ran and failed."""


def as_points(x) -> np.ndarray:
    """Coerce to a float64 array of shape (..., dim)."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1)
    return a


@dataclass(frozen=True)
class Manifold:
    """A phase space: ``kind`` is one of ``circle``, ``torus2``, ``box``.

    Box charts carry explicit per-axis ``bounds``; the quotient spaces use
    the fundamental domain [0,1) per axis.
    """

    kind: str
    bounds: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.kind not in ("circle", "torus2", "box"):
            raise InputError(f"unknown manifold kind {self.kind!r}")
        if self.kind == "box":
            if not self.bounds:
                raise InputError("box chart needs bounds")
            for lo, hi in self.bounds:
                if not hi > lo:
                    raise InputError(f"degenerate box axis [{lo}, {hi}]")
        elif self.bounds is not None:
            raise InputError("bounds are only meaningful for box charts")

    # -- constructors -------------------------------------------------
    @staticmethod
    def circle() -> "Manifold":
        return Manifold("circle")

    @staticmethod
    def torus2() -> "Manifold":
        return Manifold("torus2")

    @staticmethod
    def box(bounds) -> "Manifold":
        return Manifold("box", tuple((float(lo), float(hi)) for lo, hi in bounds))

    # -- basic facts --------------------------------------------------
    @property
    def dim(self) -> int:
        if self.kind == "circle":
            return 1
        if self.kind == "torus2":
            return 2
        return len(self.bounds)

    @property
    def is_quotient(self) -> bool:
        return self.kind in ("circle", "torus2")

    def volume(self) -> float:
        if self.is_quotient:
            return 1.0
        v = 1.0
        for lo, hi in self.bounds:
            v *= hi - lo
        return v

    def diameter(self) -> float:
        """Metric diameter of the space (0.5 per axis on quotients)."""
        if self.kind == "circle":
            return 0.5
        if self.kind == "torus2":
            return 0.5 * np.sqrt(2.0)
        side = [hi - lo for lo, hi in self.bounds]
        return float(np.sqrt(np.sum(np.square(side))))

    # -- coordinates --------------------------------------------------
    def reduce(self, x) -> np.ndarray:
        """Map coordinates to the fundamental domain (identity on charts)."""
        a = as_points(x)
        if not self.is_quotient:
            return a
        r = np.mod(a, 1.0)
        # mod can return 1.0 for tiny negative arguments
        return np.where(r >= 1.0, 0.0, r)

    def contains(self, x, tol: float = 1e-9) -> bool:
        a = as_points(x)
        if self.is_quotient:
            return bool(np.all(np.isfinite(a)))
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return bool(np.all(a >= lo - tol) and np.all(a <= hi + tol))

    def distance(self, p, q) -> np.ndarray | float:
        """Shortest-representative metric; broadcasts over leading axes."""
        a = self.reduce(p)
        b = self.reduce(q)
        diff = np.abs(a - b)
        if self.is_quotient:
            diff = np.minimum(diff, 1.0 - diff)
        d = np.sqrt(np.sum(np.square(diff), axis=-1))
        return float(d) if d.ndim == 0 else d

    def displacement(self, p, q) -> np.ndarray:
        """Vector q - p using the shortest representative on quotients."""
        a = self.reduce(p)
        b = self.reduce(q)
        diff = b - a
        if self.is_quotient:
            diff = diff - np.round(diff)
        return diff

    # -- sampling -----------------------------------------------------
    def axis_grid(self, step: float, axis: int) -> np.ndarray:
        if step <= 0:
            raise InputError("grid step must be positive")
        if self.is_quotient:
            n = max(1, int(np.ceil(1.0 / step)))
            return np.arange(n) / n
        lo, hi = self.bounds[axis]
        n = max(1, int(np.ceil((hi - lo) / step)))
        return lo + np.arange(n + 1) * (hi - lo) / n

    def grid(self, step: float) -> np.ndarray:
        """Regular grid with effective spacing <= step, shape (N, dim)."""
        axes = [self.axis_grid(step, k) for k in range(self.dim)]
        if self.dim == 1:
            return axes[0][:, None]
        gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])

    def random_points(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random((n, self.dim))
        if self.is_quotient:
            return u
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return lo + u * (hi - lo)


@dataclass(frozen=True)
class Ball:
    """Open metric ball; on quotients the radius is capped at 1/2."""

    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise InputError("ball radius must be positive")

    @staticmethod
    def of(center, radius: float) -> "Ball":
        c = np.atleast_1d(np.asarray(center, dtype=float))
        return Ball(tuple(float(v) for v in c), float(radius))

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    def check_on(self, m: Manifold):
        if m.is_quotient and self.radius > 0.5:
            raise InputError("quotient ball radius must be <= 1/2")
        if len(self.center) != m.dim:
            raise InputError("ball center dimension mismatch")

    def contains(self, m: Manifold, x, tol: float = 0.0):
        return m.distance(x, self.center_array) < self.radius + tol

    def margin(self, m: Manifold, x) -> np.ndarray | float:
        """Signed distance to the boundary: positive strictly inside."""
        d = np.asarray(m.distance(x, self.center_array))
        v = self.radius - d
        return float(v) if v.ndim == 0 else v

    def diam(self) -> float:
        return 2.0 * self.radius

    def sample(self, m: Manifold, rng: np.random.Generator, n: int) -> np.ndarray:
        """Uniform points of the ball by rejection from the bounding box."""
        c = self.center_array
        out = []
        got = 0
        while got < n:
            cand = c + (2 * rng.random((2 * n, len(c))) - 1) * self.radius
            cand = m.reduce(cand)
            keep = cand[np.asarray(m.distance(cand, c)) < self.radius]
            out.append(keep[: n - got])
            got += len(out[-1])
        return np.concatenate(out, axis=0)

    def grid(self, m: Manifold, step: float) -> np.ndarray:
        """Grid of the ball: ambient grid filtered by the metric."""
        c = self.center_array
        r = self.radius
        if m.is_quotient:
            axes = []
            for k in range(m.dim):
                n = max(3, int(np.ceil(2 * r / step)) + 1)
                axes.append(c[k] - r + np.arange(n + 1) * (2 * r / n))
        else:
            axes = []
            for k in range(m.dim):
                lo = max(m.bounds[k][0], c[k] - r)
                hi = min(m.bounds[k][1], c[k] + r)
                n = max(1, int(np.ceil((hi - lo) / step)))
                axes.append(lo + np.arange(n + 1) * (hi - lo) / n)
        if m.dim == 1:
            pts = axes[0][:, None]
        else:
            gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
            pts = np.column_stack([gx.ravel(), gy.ravel()])
        pts = m.reduce(pts)
        d = m.distance(pts, c)
        # tolerate round-off so the rim samples at distance exactly r stay
        return pts[d <= r * (1.0 + 1e-12) + 1e-15]


@dataclass(frozen=True)
class Box:
    """Open axis-aligned box region (lo_k, hi_k) per axis."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise InputError("box lo/hi dimension mismatch")
        for a, b in zip(self.lo, self.hi):
            if not b > a:
                raise InputError(f"degenerate box axis [{a}, {b}]")

    @staticmethod
    def of(lo, hi) -> "Box":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        return Box(tuple(map(float, lo)), tuple(map(float, hi)))

    @property
    def dim(self) -> int:
        return len(self.lo)

    def margin(self, m: Manifold, x) -> np.ndarray | float:
        """Signed distance to the boundary: positive strictly inside."""
        a = as_points(x)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        inner = np.minimum(a - lo, hi - a)
        v = np.min(inner, axis=-1)
        return float(v) if v.ndim == 0 else v

    def contains(self, m: Manifold, x, tol: float = 0.0):
        return self.margin(m, x) > -tol

    def diam(self) -> float:
        side = np.asarray(self.hi) - np.asarray(self.lo)
        return float(np.sqrt(np.sum(side * side)))

    def grid(self, m: Manifold, step: float) -> np.ndarray:
        axes = []
        for a, b in zip(self.lo, self.hi):
            n = max(1, int(np.ceil((b - a) / step)))
            axes.append(a + np.arange(n + 1) * (b - a) / n)
        if self.dim == 1:
            return axes[0][:, None]
        gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return lo + rng.random((n, self.dim)) * (hi - lo)


@dataclass(frozen=True)
class Cover:
    balls: tuple[Ball, ...]
    # filled in by verify_cover callers that want to carry the bound around
    lebesgue_number: float | None = None

    def __post_init__(self):
        if not self.balls:
            raise InputError("a cover needs at least one ball")


@dataclass(frozen=True)
class CoverReport:
    covers: bool
    lebesgue_number_lower_bound: float
    worst_point: tuple[float, ...]
    grid_step: float


def verify_cover(m: Manifold, cover: Cover, grid_step: float) -> CoverReport:
    """Grid check that the balls cover the space, with conservative slack.

    A grid point counts as covered only when it sits within radius_i -
    grid_step of some center.  The returned Lebesgue-number bound is the
    diameter-style constant: twice the worst-case slack radius
    min_x max_i (r_i - d(x, c_i)), minus 2*grid_step for off-grid points.
    """
    for b in cover.balls:
        b.check_on(m)
    rmin = min(b.radius for b in cover.balls)
    if grid_step > rmin / 4:
        raise InputError(
            f"grid step {grid_step} too coarse for minimum radius {rmin}; "
            "refine to at most a quarter of the smallest radius"
        )
    pts = m.grid(grid_step)
    centers = np.stack([b.center_array for b in cover.balls])
    radii = np.array([b.radius for b in cover.balls])
    # (N, k) distance table
    d = m.distance(pts[:, None, :], centers[None, :, :])
    slack = radii[None, :] - d
    best = slack.max(axis=1)
    worst_idx = int(np.argmin(best))
    covers = bool(np.all(best >= grid_step))
    lebesgue = 2.0 * (float(best[worst_idx]) - grid_step)
    return CoverReport(
        covers=covers,
        lebesgue_number_lower_bound=lebesgue,
        worst_point=tuple(float(v) for v in pts[worst_idx]),
        grid_step=float(grid_step),
    )


# ---------------------------------------------------------------------------
# diameter functionals
# ---------------------------------------------------------------------------

def distance(m: Manifold, p, q) -> np.ndarray | float:
    return m.distance(p, q)


def _unwrap(m: Manifold, pts: np.ndarray) -> np.ndarray:
    """Shift quotient samples to representatives near the first point.

    Valid while the sample spread stays under half the period per axis;
    the diameter functionals are advertised for small sets only.
    """
    if not m.is_quotient:
        return pts
    ref = pts[0]
    diff = pts - ref
    return ref + (diff - np.round(diff))


def _enclosing_circle(pts: np.ndarray, rng: np.random.Generator):
    """Smallest enclosing circle (Welzl), returns (center, radius)."""

    def circle_two(a, b):
        c = (a + b) / 2.0
        return c, float(np.linalg.norm(a - c))

    def circle_three(a, b, c):
        ax, ay = a
        bx, by = b
        cx, cy = c
        dd = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
        if abs(dd) < 1e-14:
            return None
        ux = ((ax ** 2 + ay ** 2) * (by - cy) + (bx ** 2 + by ** 2) * (cy - ay)
              + (cx ** 2 + cy ** 2) * (ay - by)) / dd
        uy = ((ax ** 2 + ay ** 2) * (cx - bx) + (bx ** 2 + by ** 2) * (ax - cx)
              + (cx ** 2 + cy ** 2) * (bx - ax)) / dd
        ctr = np.array([ux, uy])
        return ctr, float(np.linalg.norm(a - ctr))

    def covers(circ, p, tol=1e-12):
        ctr, r = circ
        return np.linalg.norm(p - ctr) <= r + tol

    order = rng.permutation(len(pts))
    c = (pts[order[0]].copy(), 0.0)
    for i in range(1, len(order)):
        p = pts[order[i]]
        if covers(c, p):
            continue
        c = (p.copy(), 0.0)
        for j in range(i):
            q = pts[order[j]]
            if covers(c, q):
                continue
            c = circle_two(p, q)
            for k in range(j):
                s = pts[order[k]]
                if covers(c, s):
                    continue
                cc = circle_three(p, q, s)
                if cc is not None:
                    c = cc
    return c


def _inscribed_1d(x: np.ndarray, tol: float) -> float:
    """Largest run length of samples with gaps <= tol (a filled interval)."""
    xs = np.sort(x)
    gaps = np.diff(xs)
    best = 0.0
    start = 0
    for i, g in enumerate(gaps):
        if g > tol:
            best = max(best, xs[i] - xs[start])
            start = i + 1
    best = max(best, xs[-1] - xs[start])
    return float(best)


def diam_functionals(m: Manifold, points, tol: float = 1e-3, seed: int = 0):
    """Outer and inner diameters of a sampled set.

    diamsup is the diameter of the smallest enclosing ball of the samples;
    diaminf the diameter of the largest sample-centered ball filled by
    samples at resolution ``tol``.  Always diaminf <= diamsup + O(tol); both
    scale linearly with the coordinates.  Quotient sets wider than half the
    period are not supported.
    """
    pts = as_points(points)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) == 0:
        raise InputError("diameter functionals need at least one sample")
    if len(pts) == 1:
        return {"diamsup": 0.0, "diaminf": 0.0}
    flat = _unwrap(m, m.reduce(pts))
    if m.is_quotient and np.any(flat.max(axis=0) - flat.min(axis=0) > 0.5 + 1e-9):
        raise InputError("sample spread exceeds half the quotient period")
    if m.dim == 1:
        x = flat[:, 0]
        diamsup = float(x.max() - x.min())
        diaminf = _inscribed_1d(x, tol)
        return {"diamsup": diamsup, "diaminf": diaminf}

    from scipy.ndimage import distance_transform_edt
    from scipy.spatial import ConvexHull, QhullError

    # enclosing ball of the set = enclosing ball of its hull vertices
    rng = np.random.default_rng(seed)
    try:
        hull_pts = flat[ConvexHull(flat).vertices]
    except QhullError:  # collinear clouds
        hull_pts = flat
    _, radius = _enclosing_circle(hull_pts, rng)
    diamsup = 2.0 * radius

    # inner ball: rasterize at cell = tol/sqrt(2) so an occupied cell keeps
    # every point within tol of a sample; the distance transform to the
    # nearest empty cell then bounds the inscribed radius from below
    cell = tol / np.sqrt(2.0)
    lo = flat.min(axis=0) - cell
    extent = flat.max(axis=0) - lo + cell
    shape = np.ceil(extent / cell).astype(int) + 1
    if np.any(shape > 4096):
        raise InputError("tolerance too fine for the sample extent")
    idx = np.floor((flat - lo) / cell).astype(int)
    mask = np.zeros(tuple(shape), dtype=bool)
    mask[tuple(idx.T)] = True
    dist = distance_transform_edt(mask, sampling=cell)
    best = max(0.0, float(dist.max()) - 1.5 * cell)
    return {"diamsup": float(diamsup), "diaminf": float(2.0 * best)}
