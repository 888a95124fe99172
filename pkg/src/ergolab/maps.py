"""Smooth map families with closed-form derivatives, words, and composition.

Every family evaluates on float64 arrays of shape (..., dim) and exposes an
exact Jacobian; no finite differences anywhere in the forward path.  Words
over a generator list follow the dynamical order: the first letter acts
first, so a word (w1, ..., wn) realizes f_{wn} o ... o f_{w1}.  Inverse
letters are permitted for invertible generators.

Each family also declares two analytic bounds used by the certificate and
robustness machinery: ``sup_op_norm`` (global sup of the derivative norm)
and ``log_deriv_lipschitz`` (sup of the gradient of log of the derivative,
0 for affine families).  Holder data for log|det D| defaults to an analytic
constant where one is available and can be estimated from samples otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .geometry import DomainError, InputError, Manifold, as_points

__all__ = [
    "Jacobian",
    "SmoothMap",
    "Rotation",
    "PerturbedRotation",
    "NorthSouth",
    "ExpandingCircle",
    "Translation2",
    "Affine1D",
    "SineAffine1D",
    "Affine2D",
    "ComplexAffine",
    "BumpRadial",
    "Composed",
    "Word",
    "apply",
    "differentiate",
    "compose_word",
    "word_map",
    "invert_word",
    "map_from_config",
    "map_to_config",
    "estimate_hoelder",
    "bump_of_c1_size",
    "perturb_generators",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Jacobian:
    """Derivative data at a point: matrix, norms, determinant."""

    matrix: np.ndarray
    op_norm: float
    co_norm: float
    det: float
    conformal_factor: float | None = None


@dataclass(frozen=True)
class Holder:
    alpha: float
    C: float


def _singulars(jac: np.ndarray):
    """Extreme singular values and determinant, closed form for dim <= 2.

    Shapes: jac (..., d, d) -> (op, co, det) each (...,).
    """
    d = jac.shape[-1]
    if d == 1:
        a = np.abs(jac[..., 0, 0])
        return a, a, jac[..., 0, 0]
    a, b = jac[..., 0, 0], jac[..., 0, 1]
    c, e = jac[..., 1, 0], jac[..., 1, 1]
    det = a * e - b * c
    t = a * a + b * b + c * c + e * e
    disc = np.sqrt(np.maximum(t * t - 4.0 * det * det, 0.0))
    smax = np.sqrt((t + disc) / 2.0)
    smin = np.where(smax > 0, np.abs(det) / np.where(smax > 0, smax, 1.0), 0.0)
    return smax, smin, det


class SmoothMap:
    """Base class; subclasses fill in eval/jac and the declared bounds."""

    manifold: Manifold
    is_diffeo: bool = True
    is_conformal: bool = False
    hoelder: Holder | None = None

    # -- core ----------------------------------------------------------
    def eval(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jac(self, x: np.ndarray) -> np.ndarray:
        """Jacobian matrices, shape (..., dim, dim)."""
        raise NotImplementedError

    def inverse_map(self) -> "SmoothMap":
        raise InputError(f"{type(self).__name__} is not invertible")

    # -- declared bounds ----------------------------------------------
    def sup_op_norm(self) -> float:
        raise NotImplementedError

    def log_deriv_lipschitz(self) -> float:
        raise NotImplementedError

    # -- conveniences --------------------------------------------------
    def __call__(self, x):
        return self.eval(as_points(x))

    def check_chart(self, x: np.ndarray, tol: float = 1e-9):
        m = self.manifold
        if m.is_quotient:
            return
        lo = np.array([b[0] for b in m.bounds])
        hi = np.array([b[1] for b in m.bounds])
        if np.any(x < lo - tol) or np.any(x > hi + tol):
            bad = np.atleast_2d(x)[0]
            raise DomainError(f"point {bad.tolist()} outside chart bounds")


# ---------------------------------------------------------------------------
# circle families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rotation(SmoothMap):
    """Rigid circle rotation x -> x + theta."""

    theta: float
    manifold: Manifold = field(default_factory=Manifold.circle)
    is_diffeo: bool = True
    is_conformal: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hoelder", Holder(1.0, 0.0))

    def eval(self, x):
        return self.manifold.reduce(x + self.theta)

    def jac(self, x):
        return np.ones(np.shape(x)[:-1] + (1, 1))

    def inverse_map(self):
        return Rotation(-self.theta)

    def sup_op_norm(self):
        return 1.0

    def log_deriv_lipschitz(self):
        return 0.0


@dataclass(frozen=True)
class PerturbedRotation(SmoothMap):
    """x -> x + theta + (eps / 2 pi) sin(2 pi (x - phase)); |eps| < 1.

    eps is the derivative amplitude: f'(x) = 1 + eps cos(2 pi (x - phase)),
    so |eps| < 1 makes the map a circle diffeomorphism.
    """

    theta: float
    eps: float
    phase: float = 0.0
    manifold: Manifold = field(default_factory=Manifold.circle)
    is_diffeo: bool = True
    is_conformal: bool = True

    def __post_init__(self):
        if abs(self.eps) >= 1.0:
            raise InputError("perturbed rotation needs |eps| < 1")
        c = TWO_PI * abs(self.eps) / (1.0 - abs(self.eps))
        object.__setattr__(self, "hoelder", Holder(1.0, c))

    def lift(self, t):
        return t + self.theta + (self.eps / TWO_PI) * np.sin(TWO_PI * (t - self.phase))

    def eval(self, x):
        return self.manifold.reduce(self.lift(x))

    def deriv(self, x):
        return 1.0 + self.eps * np.cos(TWO_PI * (x - self.phase))

    def jac(self, x):
        return self.deriv(x)[..., None]

    def inverse_map(self):
        return _MonotoneCircleInverse(self)

    def sup_op_norm(self):
        return 1.0 + abs(self.eps)

    def log_deriv_lipschitz(self):
        return self.hoelder.C


class _MonotoneCircleInverse(SmoothMap):
    """Inverse of an increasing degree-one circle map, solved on the lift.

    Bisection brackets the solution, Newton polishes it to 1e-13.
    """

    def __init__(self, forward: PerturbedRotation):
        self.fwd = forward
        self.manifold = forward.manifold
        self.is_diffeo = True
        self.is_conformal = True
        lo = 1.0 - abs(forward.eps)
        self.hoelder = Holder(1.0, forward.hoelder.C / lo)

    def eval(self, x):
        y = as_points(x)
        f = self.fwd
        amp = abs(f.eps) / TWO_PI
        lo = y - f.theta - amp - 1e-9
        hi = y - f.theta + amp + 1e-9
        for _ in range(52):
            mid = (lo + hi) / 2.0
            high = f.lift(mid) > y
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
        t = (lo + hi) / 2.0
        for _ in range(3):
            t = t - (f.lift(t) - y) / f.deriv(t)
        return self.manifold.reduce(t)

    def jac(self, x):
        t = self.eval(x)
        return (1.0 / self.fwd.deriv(t))[..., None]

    def inverse_map(self):
        return self.fwd

    def sup_op_norm(self):
        return 1.0 / (1.0 - abs(self.fwd.eps))

    def log_deriv_lipschitz(self):
        return self.fwd.log_deriv_lipschitz() * self.sup_op_norm()


@dataclass(frozen=True)
class NorthSouth(SmoothMap):
    """Circle map with one attracting and one repelling fixed point.

    x -> (1/pi) atan2(lam sin(pi x), cos(pi x)), a diffeomorphism fixing 0
    and 1/2 with derivatives lam and 1/lam.  The inverse is the member with
    parameter 1/lam.
    """

    lam: float
    manifold: Manifold = field(default_factory=Manifold.circle)
    is_diffeo: bool = True
    is_conformal: bool = True

    def __post_init__(self):
        if self.lam <= 0:
            raise InputError("north-south parameter must be positive")
        object.__setattr__(self, "hoelder", Holder(1.0, self.log_deriv_lipschitz()))

    def eval(self, x):
        px = np.pi * np.asarray(x, dtype=float)
        y = np.arctan2(self.lam * np.sin(px), np.cos(px)) / np.pi
        return self.manifold.reduce(y)

    def deriv(self, x):
        px = np.pi * np.asarray(x, dtype=float)
        c, s = np.cos(px), np.sin(px)
        return self.lam / (c * c + self.lam ** 2 * s * s)

    def jac(self, x):
        return self.deriv(x)[..., None]

    def inverse_map(self):
        return NorthSouth(1.0 / self.lam)

    def sup_op_norm(self):
        return max(self.lam, 1.0 / self.lam)

    def log_deriv_lipschitz(self):
        return np.pi * abs(self.lam ** 2 - 1.0) / self.lam


@dataclass(frozen=True)
class ExpandingCircle(SmoothMap):
    """Linear covering map x -> m x of the circle; a local diffeomorphism."""

    degree: int
    manifold: Manifold = field(default_factory=Manifold.circle)
    is_diffeo: bool = False
    is_conformal: bool = True

    def __post_init__(self):
        if self.degree < 1:
            raise InputError("degree must be a positive integer")
        object.__setattr__(self, "hoelder", Holder(1.0, 0.0))

    def eval(self, x):
        return self.manifold.reduce(np.asarray(x, dtype=float) * self.degree)

    def jac(self, x):
        return np.full(np.shape(x)[:-1] + (1, 1), float(self.degree))

    def sup_op_norm(self):
        return float(self.degree)

    def log_deriv_lipschitz(self):
        return 0.0


# ---------------------------------------------------------------------------
# torus and chart families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Translation2(SmoothMap):
    """Torus translation (x, y) -> (x + a, y + b)."""

    a: float
    b: float
    manifold: Manifold = field(default_factory=Manifold.torus2)
    is_diffeo: bool = True
    is_conformal: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hoelder", Holder(1.0, 0.0))

    def eval(self, x):
        return self.manifold.reduce(x + np.array([self.a, self.b]))

    def jac(self, x):
        return np.broadcast_to(np.eye(2), np.shape(x)[:-1] + (2, 2)).copy()

    def inverse_map(self):
        return Translation2(-self.a, -self.b)

    def sup_op_norm(self):
        return 1.0

    def log_deriv_lipschitz(self):
        return 0.0


@dataclass(frozen=True)
class Affine1D(SmoothMap):
    """x -> a x + b on an interval chart."""

    a: float
    b: float
    manifold: Manifold = field(default_factory=lambda: Manifold.box([(0.0, 1.0)]))
    is_diffeo: bool = True
    is_conformal: bool = True

    def __post_init__(self):
        if self.a == 0:
            raise InputError("affine map needs a != 0")
        object.__setattr__(self, "hoelder", Holder(1.0, 0.0))

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        self.check_chart(x)
        return self.a * x + self.b

    def jac(self, x):
        return np.full(np.shape(x)[:-1] + (1, 1), float(self.a))

    def inverse_map(self):
        return Affine1D(1.0 / self.a, -self.b / self.a, self.manifold)

    def sup_op_norm(self):
        return abs(self.a)

    def log_deriv_lipschitz(self):
        return 0.0


@dataclass(frozen=True)
class SineAffine1D(SmoothMap):
    """x -> a x + b + eps sin(2 pi (x - phase)) on an interval chart.

    A contraction with genuinely nonconstant derivative, so its distortion
    constants are nontrivial.  Monotonicity needs a > 2 pi |eps|; then
    h'(x) = a + 2 pi eps cos(2 pi (x - phase)) stays positive and
    sup |h''/h'| = 4 pi^2 |eps| / sqrt(a^2 - 4 pi^2 eps^2) exactly.
    """

    a: float
    b: float
    eps: float
    phase: float = 0.0
    manifold: Manifold = field(default_factory=lambda: Manifold.box([(0.0, 1.0)]))
    is_diffeo: bool = True
    is_conformal: bool = True

    def __post_init__(self):
        if self.a <= TWO_PI * abs(self.eps):
            raise InputError("sine affine map needs a > 2 pi |eps|")
        c = TWO_PI ** 2 * abs(self.eps) / np.sqrt(
            self.a ** 2 - (TWO_PI * self.eps) ** 2)
        object.__setattr__(self, "hoelder", Holder(1.0, c))

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        self.check_chart(x)
        return self.a * x + self.b + self.eps * np.sin(TWO_PI * (x - self.phase))

    def deriv(self, x):
        return self.a + TWO_PI * self.eps * np.cos(TWO_PI * (x - self.phase))

    def jac(self, x):
        x = np.asarray(x, dtype=float)
        return self.deriv(x[..., 0])[..., None, None]

    def inverse_map(self):
        return _SineAffineInverse(self)

    def sup_op_norm(self):
        return self.a + TWO_PI * abs(self.eps)

    def log_deriv_lipschitz(self):
        return self.hoelder.C


class _SineAffineInverse(SmoothMap):
    """Inverse of a monotone sine-affine interval map, solved numerically.

    Bisection brackets the preimage, Newton polishes it to 1e-13.
    """

    def __init__(self, forward: SineAffine1D):
        self.fwd = forward
        self.manifold = forward.manifold
        self.is_diffeo = True
        self.is_conformal = True
        lo = forward.a - TWO_PI * abs(forward.eps)
        self.hoelder = Holder(1.0, forward.hoelder.C / lo)

    def eval(self, x):
        y = as_points(x)
        f = self.fwd
        lo = (y - f.b - abs(f.eps)) / f.a - 1e-9
        hi = (y - f.b + abs(f.eps)) / f.a + 1e-9
        for _ in range(52):
            mid = (lo + hi) / 2.0
            high = f.a * mid + f.b + f.eps * np.sin(
                TWO_PI * (mid - f.phase)) > y
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
        t = (lo + hi) / 2.0
        for _ in range(3):
            t = t - (f.a * t + f.b + f.eps * np.sin(TWO_PI * (t - f.phase)) - y) / f.deriv(t)
        return t

    def jac(self, x):
        t = np.asarray(self.eval(x), dtype=float)
        return (1.0 / self.fwd.deriv(t[..., 0]))[..., None, None]

    def sup_op_norm(self):
        return 1.0 / (self.fwd.a - TWO_PI * abs(self.fwd.eps))

    def log_deriv_lipschitz(self):
        return self.hoelder.C

    def inverse_map(self):
        return self.fwd


@dataclass(frozen=True)
class Affine2D(SmoothMap):
    """Diagonal affine map (x, y) -> (ax x + bx, ay y + by) on a box chart."""

    ax: float
    ay: float
    bx: float
    by: float
    manifold: Manifold = field(
        default_factory=lambda: Manifold.box([(0.0, 1.0), (0.0, 1.0)])
    )
    is_diffeo: bool = True
    is_conformal: bool = False

    def __post_init__(self):
        if self.ax == 0 or self.ay == 0:
            raise InputError("affine map needs nonzero scales")
        object.__setattr__(self, "is_conformal", abs(self.ax) == abs(self.ay))
        object.__setattr__(self, "hoelder", Holder(1.0, 0.0))

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        self.check_chart(x)
        return x * np.array([self.ax, self.ay]) + np.array([self.bx, self.by])

    def jac(self, x):
        j = np.zeros(np.shape(x)[:-1] + (2, 2))
        j[..., 0, 0] = self.ax
        j[..., 1, 1] = self.ay
        return j

    def inverse_map(self):
        return Affine2D(
            1.0 / self.ax, 1.0 / self.ay,
            -self.bx / self.ax, -self.by / self.ay, self.manifold,
        )

    def sup_op_norm(self):
        return max(abs(self.ax), abs(self.ay))

    def log_deriv_lipschitz(self):
        return 0.0


@dataclass(frozen=True)
class ComplexAffine(SmoothMap):
    """z -> scale e^{i angle} z + offset on a planar chart; conformal."""

    scale: float
    angle: float
    offset: tuple[float, float]
    manifold: Manifold = field(
        default_factory=lambda: Manifold.box([(0.0, 1.0), (0.0, 1.0)])
    )
    is_diffeo: bool = True
    is_conformal: bool = True

    def __post_init__(self):
        if self.scale <= 0:
            raise InputError("conformal affine map needs scale > 0")
        object.__setattr__(self, "hoelder", Holder(1.0, 0.0))

    def _matrix(self):
        c, s = np.cos(self.angle), np.sin(self.angle)
        return self.scale * np.array([[c, -s], [s, c]])

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        self.check_chart(x)
        return x @ self._matrix().T + np.asarray(self.offset)

    def jac(self, x):
        return np.broadcast_to(self._matrix(), np.shape(x)[:-1] + (2, 2)).copy()

    def inverse_map(self):
        inv = self._matrix()
        binv = -np.linalg.solve(inv, np.asarray(self.offset))
        return ComplexAffine(
            1.0 / self.scale, -self.angle, (float(binv[0]), float(binv[1])),
            self.manifold,
        )

    def sup_op_norm(self):
        return self.scale

    def log_deriv_lipschitz(self):
        return 0.0


class BumpRadial(SmoothMap):
    """Radial bump: similarity by ``scale`` inside r_in around the center,
    identity outside r_out, C^1 cubic blend on the annulus.

    The blend profile m(s) interpolates scale -> 1 with m'(r_in) =
    m'(r_out) = 0, so the glued map is C^1 on the whole space.  On
    quotients the displacement uses the shortest representative; r_out must
    stay below half the period.  Radial monotonicity (m + s m' > 0) is
    checked at construction.
    """

    def __init__(self, manifold: Manifold, center, r_in: float, r_out: float,
                 scale: float):
        if not 0 < r_in < r_out:
            raise InputError("need 0 < r_in < r_out")
        if manifold.is_quotient and r_out >= 0.5:
            raise InputError("bump support must fit in half the period")
        if scale <= 0:
            raise InputError("bump scale must be positive")
        self.manifold = manifold
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.r_in = float(r_in)
        self.r_out = float(r_out)
        self.scale = float(scale)
        self.is_diffeo = True
        self.is_conformal = manifold.dim == 1
        s = np.linspace(0, r_out * 1.01, 4001)
        radial = self._m(s) + s * self._dm(s)
        if np.min(radial) <= 1e-9:
            raise InputError("bump profile is not radially monotone")
        self._sup_radial = float(np.max(np.maximum(self._m(s), radial)))
        dlog = np.abs(np.gradient(np.log(radial), s))
        self._lip = float(np.max(dlog)) * 1.25
        dim = manifold.dim
        det = self._m(s) ** (dim - 1) * radial
        dlogdet = np.abs(np.gradient(np.log(np.abs(det)), s))
        self.hoelder = Holder(1.0, float(np.max(dlogdet)) * 1.25)

    def _t(self, s):
        return np.clip((s - self.r_in) / (self.r_out - self.r_in), 0.0, 1.0)

    def _m(self, s):
        t = self._t(s)
        return self.scale + (1.0 - self.scale) * (3 * t * t - 2 * t ** 3)

    def _dm(self, s):
        t = self._t(s)
        inside = (s > self.r_in) & (s < self.r_out)
        return np.where(
            inside, (1.0 - self.scale) * 6 * t * (1 - t) / (self.r_out - self.r_in), 0.0
        )

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        v = self.manifold.displacement(self.center, x)
        s = np.sqrt(np.sum(v * v, axis=-1))
        y = self.center + self._m(s)[..., None] * v
        return self.manifold.reduce(y)

    def jac(self, x):
        x = np.asarray(x, dtype=float)
        v = self.manifold.displacement(self.center, x)
        s = np.sqrt(np.sum(v * v, axis=-1))
        m = self._m(s)
        dm = self._dm(s)
        d = self.manifold.dim
        if d == 1:
            return (m + s * dm)[..., None, None]
        eye = np.broadcast_to(np.eye(2), np.shape(x)[:-1] + (2, 2))
        safe = np.where(s > 0, s, 1.0)
        vv = v[..., :, None] * v[..., None, :] / (safe * safe)[..., None, None]
        return m[..., None, None] * eye + (s * dm)[..., None, None] * vv

    def inverse_map(self):
        return _BumpInverse(self)

    def sup_op_norm(self):
        return self._sup_radial

    def log_deriv_lipschitz(self):
        return self._lip


class _BumpInverse(SmoothMap):
    """Inverse of a radial bump: solves u = s m(s) by bisection per point."""

    def __init__(self, fwd: BumpRadial):
        self.fwd = fwd
        self.manifold = fwd.manifold
        self.is_diffeo = True
        self.is_conformal = fwd.is_conformal
        self.hoelder = fwd.hoelder

    def _solve_radius(self, u):
        f = self.fwd
        lo = np.zeros_like(u)
        hi = np.full_like(u, f.r_out)
        outside = u >= f.r_out
        for _ in range(60):
            mid = (lo + hi) / 2.0
            high = mid * f._m(mid) > u
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
        s = (lo + hi) / 2.0
        return np.where(outside, u, s)

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        f = self.fwd
        v = self.manifold.displacement(f.center, x)
        u = np.sqrt(np.sum(v * v, axis=-1))
        s = self._solve_radius(u)
        factor = np.where(u > 0, s / np.where(u > 0, u, 1.0), 1.0)
        return self.manifold.reduce(f.center + factor[..., None] * v)

    def jac(self, x):
        y = self.eval(x)
        jf = self.fwd.jac(y)
        return np.linalg.inv(jf)

    def inverse_map(self):
        return self.fwd

    def sup_op_norm(self):
        f = self.fwd
        s = np.linspace(0, f.r_out * 1.01, 4001)
        radial = f._m(s) + s * f._dm(s)
        return float(1.0 / np.min(np.minimum(f._m(s), radial)))

    def log_deriv_lipschitz(self):
        return self.fwd.log_deriv_lipschitz() * self.sup_op_norm()


class Composed(SmoothMap):
    """Composition of maps applied first-to-last (parts[0] acts first)."""

    def __init__(self, parts):
        parts = tuple(parts)
        if not parts:
            raise InputError("empty composition")
        self.parts = parts
        self.manifold = parts[0].manifold
        self.is_diffeo = all(p.is_diffeo for p in parts)
        self.is_conformal = all(p.is_conformal for p in parts)
        alpha = 1.0
        c = 0.0
        s = 1.0
        for p in parts:
            if p.hoelder is None:
                c = None
                break
            c += p.hoelder.C * s
            s *= p.sup_op_norm()
        self.hoelder = Holder(alpha, c) if c is not None else None

    def eval(self, x):
        for p in self.parts:
            x = p.eval(x)
        return x

    def jac(self, x):
        x = np.asarray(x, dtype=float)
        total = None
        for p in self.parts:
            step = p.jac(x)
            total = step if total is None else step @ total
            x = p.eval(x)
        return total

    def inverse_map(self):
        return Composed([p.inverse_map() for p in reversed(self.parts)])

    def sup_op_norm(self):
        s = 1.0
        for p in self.parts:
            s *= p.sup_op_norm()
        return s

    def log_deriv_lipschitz(self):
        c = 0.0
        s = 1.0
        for p in self.parts:
            c += p.log_deriv_lipschitz() * s
            s *= p.sup_op_norm()
        return c


# ---------------------------------------------------------------------------
# words
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Word:
    """Sequence of (generator index, inverted) letters, first letter first."""

    letters: tuple[tuple[int, bool], ...]

    @staticmethod
    def of(*indices: int) -> "Word":
        return Word(tuple((int(i), False) for i in indices))

    @staticmethod
    def parse(text: str) -> "Word":
        """Parse dash-joined letters; a trailing ``i`` marks an inverse."""
        if not text:
            return Word(())
        out = []
        for tok in text.split("-"):
            if tok.endswith("i"):
                out.append((int(tok[:-1]), True))
            else:
                out.append((int(tok), False))
        return Word(tuple(out))

    def __str__(self):
        return "-".join(f"{i}i" if inv else str(i) for i, inv in self.letters)

    def __len__(self):
        return len(self.letters)

    def __add__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)


def _letter_map(generators, letter, cache) -> SmoothMap:
    idx, inv = letter
    if idx < 0 or idx >= len(generators):
        raise InputError(f"letter index {idx} out of range")
    if not inv:
        return generators[idx]
    if idx not in cache:
        g = generators[idx]
        if not g.is_diffeo:
            raise InputError(f"generator {idx} is not invertible")
        cache[idx] = g.inverse_map()
    return cache[idx]


def word_map(generators, word: Word) -> Composed:
    """Resolve a word into a composed map handle with the exact chain rule."""
    cache: dict[int, SmoothMap] = {}
    parts = [_letter_map(generators, l, cache) for l in word.letters]
    if not parts:
        parts = [_Identity(generators[0].manifold)]
    return Composed(parts)


class _Identity(SmoothMap):
    def __init__(self, manifold):
        self.manifold = manifold
        self.is_diffeo = True
        self.is_conformal = True
        self.hoelder = Holder(1.0, 0.0)

    def eval(self, x):
        return np.asarray(x, dtype=float)

    def jac(self, x):
        d = self.manifold.dim
        return np.broadcast_to(np.eye(d), np.shape(x)[:-1] + (d, d)).copy()

    def inverse_map(self):
        return self

    def sup_op_norm(self):
        return 1.0

    def log_deriv_lipschitz(self):
        return 0.0


def invert_word(word: Word) -> Word:
    return Word(tuple((i, not inv) for i, inv in reversed(word.letters)))


def apply(m: SmoothMap, x) -> np.ndarray:
    return m.eval(as_points(x))


def differentiate(m: SmoothMap, x) -> Jacobian:
    j = m.jac(as_points(x))
    j = j.reshape(j.shape[-2:])
    op, co, det = _singulars(j[None, ...])
    op, co, det = float(op[0]), float(co[0]), float(det[0])
    return Jacobian(
        matrix=j,
        op_norm=op,
        co_norm=co,
        det=det,
        conformal_factor=op if m.is_conformal else None,
    )


def compose_word(generators, word: Word, x) -> dict:
    """Walk a word from x, accumulating stepwise log-derivative sums.

    Returns the endpoint, the chained Jacobian matrix, and the running sums
    of log co-norm, log op-norm, and log |det| taken from the stepwise
    Jacobians (exact accumulation, not recomputed from the product).
    """
    cache: dict[int, SmoothMap] = {}
    pt = as_points(x).astype(float)
    d = pt.shape[-1]
    total = np.eye(d)
    s_co = s_op = s_det = 0.0
    trajectory = [pt.copy()]
    for k, letter in enumerate(word.letters):
        mp = _letter_map(generators, letter, cache)
        try:
            j = mp.jac(pt).reshape(d, d)
            op, co, det = _singulars(j[None, ...])
            nxt = mp.eval(pt)
        except DomainError as err:
            raise DomainError(
                f"trajectory exits a contraction's domain at prefix "
                f"{Word(word.letters[: k + 1])}: {err}"
            ) from err
        if co[0] <= 0 or det[0] == 0:
            raise InputError(f"singular derivative along word at step {k}")
        total = j @ total
        s_co += float(np.log(co[0]))
        s_op += float(np.log(op[0]))
        s_det += float(np.log(np.abs(det[0])))
        pt = nxt
        trajectory.append(pt.copy())
    return {
        "point": pt,
        "matrix": total,
        "log_conorm_sum": s_co,
        "log_opnorm_sum": s_op,
        "log_absdet_sum": s_det,
        "trajectory": trajectory,
    }


# ---------------------------------------------------------------------------
# configuration schema
# ---------------------------------------------------------------------------

_FAMILIES = {
    "rotation": (Rotation, ("theta",)),
    "perturbed_rotation": (PerturbedRotation, ("theta", "eps", "phase")),
    "north_south": (NorthSouth, ("lam",)),
    "expanding_circle": (ExpandingCircle, ("degree",)),
    "translation2": (Translation2, ("a", "b")),
    "affine1d": (Affine1D, ("a", "b")),
    "sine_affine1d": (SineAffine1D, ("a", "b", "eps", "phase")),
    "affine2d": (Affine2D, ("ax", "ay", "bx", "by")),
    "complex_affine": (ComplexAffine, ("scale", "angle", "offset")),
    "bump_conformal": (BumpRadial, ("center", "r_in", "r_out", "scale")),
}


def map_from_config(manifold: Manifold, config: dict) -> SmoothMap:
    """Instantiate a family from {"family": ..., "params": {...}}."""
    if not isinstance(config, dict) or "family" not in config:
        raise InputError("map config needs a 'family' key")
    fam = config["family"]
    if fam not in _FAMILIES:
        raise InputError(f"unknown map family {fam!r}")
    cls, names = _FAMILIES[fam]
    params = dict(config.get("params", {}))
    extra = set(params) - set(names)
    if extra:
        raise InputError(f"unknown parameters for {fam}: {sorted(extra)}")
    missing = [n for n in names if n not in params and n != "phase"]
    if missing:
        raise InputError(f"missing parameters for {fam}: {missing}")
    if fam == "complex_affine":
        params["offset"] = tuple(float(v) for v in params["offset"])
    if fam == "bump_conformal":
        return BumpRadial(manifold, **params)
    if fam in ("affine1d", "sine_affine1d", "affine2d", "complex_affine"):
        return cls(manifold=manifold, **params)
    made = cls(**params)
    if made.manifold.kind != manifold.kind:
        raise InputError(f"family {fam} lives on {made.manifold.kind}, not {manifold.kind}")
    return made


def map_to_config(m: SmoothMap) -> dict:
    for fam, (cls, names) in _FAMILIES.items():
        if type(m) is cls:
            params = {}
            for n in names:
                v = getattr(m, n)
                params[n] = list(v) if isinstance(v, (tuple, np.ndarray)) else v
            return {"family": fam, "params": params}
    raise InputError(f"{type(m).__name__} has no config form")


# ---------------------------------------------------------------------------
# Holder estimation and perturbations
# ---------------------------------------------------------------------------


def estimate_hoelder(m: SmoothMap, alpha: float = 1.0, n_pairs: int = 100_000,
                     seed: int = 0) -> Holder:
    """Sampled Holder constant of log|det D| with a 1.5x safety factor."""
    rng = np.random.default_rng(seed)
    pts = m.manifold.random_points(rng, 2 * n_pairs)
    x, y = pts[:n_pairs], pts[n_pairs:]
    jx = m.jac(x)
    jy = m.jac(y)
    _, _, dx = _singulars(jx)
    _, _, dy = _singulars(jy)
    d = np.asarray(m.manifold.distance(x, y))
    keep = d > 1e-12
    ratio = np.abs(np.log(np.abs(dx[keep])) - np.log(np.abs(dy[keep])))
    c = float(np.max(ratio / d[keep] ** alpha)) if np.any(keep) else 0.0
    return Holder(alpha, 1.5 * c)


def bump_of_c1_size(manifold: Manifold, center, delta: float,
                    r_in: float = 0.05, r_out: float = 0.2,
                    direction: float = 1.0) -> BumpRadial:
    """Radial bump whose C^1 distance from the identity is at most delta.

    The C^1 norm is bounded by |1 - scale| (r_out + 1 + 1.5 r_out /
    (r_out - r_in)); the scale is chosen to meet the requested delta.
    """
    if delta <= 0:
        raise InputError("perturbation size must be positive")
    bound = r_out + 1.0 + 1.5 * r_out / (r_out - r_in)
    amp = delta / bound
    scale = 1.0 + np.sign(direction) * amp
    return BumpRadial(manifold, center, r_in, r_out, scale)


def perturb_generators(generators, delta: float, rng: np.random.Generator):
    """Post-compose each generator with a random bump of C^1 size <= delta."""
    out = []
    for g in generators:
        budget = delta / max(1.0, g.sup_op_norm())
        m = g.manifold
        if m.is_quotient:
            center = rng.random(m.dim)
            r_out = 0.2
        else:
            lo = np.array([b[0] for b in m.bounds])
            hi = np.array([b[1] for b in m.bounds])
            span = np.min(hi - lo)
            r_out = 0.2 * span
            center = lo + (0.3 + 0.4 * rng.random(m.dim)) * (hi - lo)
        direction = 1.0 if rng.random() < 0.5 else -1.0
        bump = bump_of_c1_size(m, center, budget, r_in=r_out / 4,
                               r_out=r_out, direction=direction)
        out.append(Composed([g, bump]))
    return out
