"""Domain types and the closed-form catalog of fields, potentials and regions.

Every evaluation is vectorized: points are arrays of shape (m, n), field
values come back as complex arrays of shape (m,), potentials and gradients
as (m, n).  All catalog entries carry enough closed-form metadata (norms,
support radii, derivative bounds) for the engines to assemble rigorous
truncation bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as _dc_field
from typing import Callable, Optional

import numpy as np

from .errors import (
    DimensionMismatch,
    GradientUnavailable,
    InvalidParams,
    NonIntegrableField,
)
from .gridquad import geometric_edges, linear_rule, panel_rule
from .special import ball_volume, sphere_area

NORM_FLAVORS = ("euclid", "split_p")


@dataclass(frozen=True)
class Params:
    """The triple (n, p, s) plus the complex-norm flavor."""

    n: int
    p: float
    s: float
    norm_flavor: str = "euclid"

    def __post_init__(self):
        if not (isinstance(self.n, int) and self.n >= 1):
            raise InvalidParams(f"dimension n must be a positive integer, got {self.n!r}")
        if not (1.0 <= self.p < math.inf):
            raise InvalidParams(f"exponent p must satisfy 1 <= p < inf, got {self.p!r}")
        if not (0.0 < self.s < 1.0):
            raise InvalidParams(f"fractional order s must lie in (0, 1), got {self.s!r}")
        if self.norm_flavor not in NORM_FLAVORS:
            raise InvalidParams(f"norm_flavor must be one of {NORM_FLAVORS}")

    @property
    def sp(self) -> float:
        return self.s * self.p

    def require_hardy(self) -> None:
        """Hardy-type operations need n > s*p."""
        if not self.n > self.sp:
            raise InvalidParams(
                f"Hardy-type quantity requires n > s*p, got n={self.n}, s*p={self.sp:g}"
            )


@dataclass(frozen=True)
class EnergyEstimate:
    """One evaluation of the double-integral energy with its error budget."""

    value: float
    stat_error: float
    trunc_error: float
    method: str
    budget: int
    seed: Optional[int] = None

    def __post_init__(self):
        if self.value < 0 or self.stat_error < 0 or self.trunc_error < 0:
            raise InvalidParams("estimate components must be nonnegative")

    @property
    def combined_error(self) -> float:
        return 3.0 * self.stat_error + self.trunc_error


@dataclass(frozen=True)
class LimitFit:
    """Extrapolated limit of a scaled s-scan with fit diagnostics."""

    limit: float
    coefficients: tuple
    residual: float
    s_grid: tuple
    model: str


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------


class SetRegion:
    """Bounded measurable set with exact membership and overlap geometry."""

    kind = "region"
    dimension: int

    def contains(self, xs) -> np.ndarray:
        raise NotImplementedError

    def measure(self) -> float:
        raise NotImplementedError

    def boundary_measure(self) -> float:
        raise NotImplementedError

    def bounding_radius(self) -> float:
        raise NotImplementedError

    def diameter(self) -> float:
        raise NotImplementedError

    def complement_overlap(self, z) -> np.ndarray:
        """measure(E minus (E - z)), evaluated stably near z = 0."""
        raise NotImplementedError

    def overlap_rule(self, z, order: int = 12):
        """Quadrature nodes/weights over E intersect (E - z)."""
        raise NotImplementedError

    def sample(self, rng, m: int) -> np.ndarray:
        """Uniform samples from the region."""
        raise NotImplementedError


class BallRegion(SetRegion):
    kind = "ball"

    def __init__(self, center, radius: float):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if radius <= 0 or not np.all(np.isfinite(center)):
            raise InvalidParams("ball region needs finite center and radius > 0")
        self.center = center
        self.radius = float(radius)
        self.dimension = center.size

    def contains(self, xs):
        xs = np.atleast_2d(xs)
        return np.sum((xs - self.center) ** 2, axis=1) <= self.radius**2

    def measure(self):
        return ball_volume(self.dimension, self.radius)

    def boundary_measure(self):
        return sphere_area(self.dimension) * self.radius ** (self.dimension - 1)

    def bounding_radius(self):
        return float(np.linalg.norm(self.center)) + self.radius

    def diameter(self):
        return 2.0 * self.radius

    def complement_overlap(self, z):
        d = np.linalg.norm(np.atleast_2d(z), axis=1)
        rho, n = self.radius, self.dimension
        q = np.clip(d / (2.0 * rho), 0.0, 1.0)
        if n == 1:
            return np.minimum(d, 2.0 * rho)
        if n == 2:
            # pi*rho^2 - lens area, written without cancellation at small d
            return 2.0 * rho**2 * np.arcsin(q) + d * rho * np.sqrt(np.clip(1 - q**2, 0, None))
        raise InvalidParams("overlap geometry provided for n <= 2")

    def overlap_rule(self, z, order: int = 12):
        z = np.asarray(z, dtype=float)
        d = float(np.linalg.norm(z))
        rho, n = self.radius, self.dimension
        if d >= 2.0 * rho:
            return np.zeros((0, n)), np.zeros(0)
        if n == 1:
            lo = self.center[0] - rho
            hi = self.center[0] + rho
            a, b = max(lo, lo - z[0]), min(hi, hi - z[0])
            if b <= a:
                return np.zeros((0, 1)), np.zeros(0)
            t, w = linear_rule(a, b, 4, order)
            return t[:, None], w
        # n == 2: slice the lens along the shift direction, kink at t = -d/2
        e1 = z / d if d > 0 else np.array([1.0, 0.0])
        e2 = np.array([-e1[1], e1[0]])
        edges = np.unique(np.concatenate([np.linspace(-rho, rho - d, 9), [-d / 2.0]]))
        t, wt = panel_rule(edges, order)
        u, wu = panel_rule(np.linspace(-1.0, 1.0, 5), order)
        halfw = np.sqrt(np.clip(rho**2 - np.maximum(t**2, (t + d) ** 2), 0.0, None))
        pts = (
            self.center[None, None, :]
            + t[:, None, None] * e1[None, None, :]
            + (halfw[:, None] * u[None, :])[:, :, None] * e2[None, None, :]
        ).reshape(-1, 2)
        wts = (wt[:, None] * halfw[:, None] * wu[None, :]).ravel()
        return pts, wts

    def sample(self, rng, m):
        n = self.dimension
        g = rng.standard_normal((m, n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = self.radius * rng.random(m) ** (1.0 / n)
        return self.center + g * r[:, None]


class BoxRegion(SetRegion):
    kind = "box"

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.size != hi.size or not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise InvalidParams("box region needs finite matching corners")
        if not np.all(hi > lo):
            raise InvalidParams("box region needs positive measure")
        self.lo, self.hi = lo, hi
        self.dimension = lo.size

    def contains(self, xs):
        xs = np.atleast_2d(xs)
        return np.all((xs >= self.lo) & (xs <= self.hi), axis=1)

    def measure(self):
        return float(np.prod(self.hi - self.lo))

    def boundary_measure(self):
        ell = self.hi - self.lo
        if self.dimension == 1:
            return 2.0
        total = 0.0
        for i in range(self.dimension):
            total += 2.0 * np.prod(np.delete(ell, i))
        return float(total)

    def bounding_radius(self):
        return float(max(np.linalg.norm(self.lo), np.linalg.norm(self.hi)))

    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))

    def complement_overlap(self, z):
        z = np.atleast_2d(z)
        ell = self.hi - self.lo
        a = np.minimum(np.abs(z), ell)
        if self.dimension == 1:
            return a[:, 0]
        if self.dimension == 2:
            return ell[0] * a[:, 1] + ell[1] * a[:, 0] - a[:, 0] * a[:, 1]
        raise InvalidParams("overlap geometry provided for n <= 2")

    def overlap_rule(self, z, order: int = 12):
        z = np.asarray(z, dtype=float)
        lo = np.maximum(self.lo, self.lo - z)
        hi = np.minimum(self.hi, self.hi - z)
        if np.any(hi <= lo):
            return np.zeros((0, self.dimension)), np.zeros(0)
        rules = [linear_rule(lo[i], hi[i], 3, order) for i in range(self.dimension)]
        if self.dimension == 1:
            return rules[0][0][:, None], rules[0][1]
        xx, yy = np.meshgrid(rules[0][0], rules[1][0], indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        wts = (rules[0][1][:, None] * rules[1][1][None, :]).ravel()
        return pts, wts

    def sample(self, rng, m):
        return self.lo + rng.random((m, self.dimension)) * (self.hi - self.lo)


# ---------------------------------------------------------------------------
# scalar fields
# ---------------------------------------------------------------------------


class ScalarField:
    """Complex-valued function on R^n with catalog metadata."""

    kind = "custom"
    analytic_gradient = False

    def __init__(self, dimension: int):
        self.dimension = int(dimension)

    def values(self, xs) -> np.ndarray:
        raise NotImplementedError

    def gradient_values(self, xs) -> np.ndarray:
        raise GradientUnavailable(f"{self.kind} field has no analytic gradient")

    def closed_lp_norm(self, p: float) -> Optional[float]:
        return None

    def radial_profile(self, r) -> Optional[np.ndarray]:
        """|u| at radius r when the modulus is radial, else None."""
        return None

    @property
    def support_radius(self) -> Optional[float]:
        return None

    @property
    def is_radial(self) -> bool:
        """True when u itself (not just |u|) is invariant under rotations."""
        return False

    def modulus_field(self) -> "ScalarField":
        raise NotImplementedError

    def derivative_sups(self):
        """(sup|u|, sup|grad u|, sup of second directional derivatives)."""
        raise GradientUnavailable(f"{self.kind} field carries no derivative bounds")

    def effective_radius(self, p: float, eps: float = 1e-8) -> float:
        """Radius capturing a (1 - eps) fraction of ||u||_p^p."""
        if self.support_radius is not None:
            return self.support_radius
        total = field_lp_norm_p(self, p)
        r, w = panel_rule(geometric_edges(1e-6, 1e3, 1.0), 12)
        f = self.radial_profile(r)
        if f is None:
            raise NonIntegrableField("effective radius needs a radial modulus profile")
        dens = w * f**p * r ** (self.dimension - 1) * sphere_area(self.dimension)
        csum = np.cumsum(dens[::-1])[::-1]
        idx = np.searchsorted(-csum, -eps * total)
        return float(r[min(idx, len(r) - 1)])


class GaussianField(ScalarField):
    """u(x) = exp(-|x|^2 / w^2)."""

    kind = "gaussian"
    analytic_gradient = True

    def __init__(self, dimension: int, width: float = 1.0):
        super().__init__(dimension)
        if width <= 0:
            raise InvalidParams("gaussian width must be positive")
        self.width = float(width)

    def values(self, xs):
        xs = np.atleast_2d(xs)
        return np.exp(-np.sum(xs**2, axis=1) / self.width**2).astype(complex)

    def gradient_values(self, xs):
        xs = np.atleast_2d(xs)
        return (-2.0 / self.width**2) * xs * self.values(xs)[:, None]

    def closed_lp_norm(self, p):
        return (math.pi * self.width**2 / p) ** (self.dimension / 2.0)

    def radial_profile(self, r):
        return np.exp(-np.asarray(r) ** 2 / self.width**2)

    @property
    def is_radial(self):
        return True

    def modulus_field(self):
        return self

    def derivative_sups(self):
        w = self.width
        return 1.0, math.sqrt(2.0 / math.e) / w, 2.0 / w**2


class BumpField(ScalarField):
    """Mollifier exp(1 - R^2/(R^2 - |x|^2)) on |x| < R, zero outside; max 1."""

    kind = "bump"
    analytic_gradient = True

    def __init__(self, dimension: int, radius: float = 1.0):
        super().__init__(dimension)
        if radius <= 0:
            raise InvalidParams("bump radius must be positive")
        self.radius = float(radius)
        self._sups = None

    def _inside(self, r2):
        return r2 < self.radius**2 * (1.0 - 1e-14)

    def values(self, xs):
        xs = np.atleast_2d(xs)
        r2 = np.sum(xs**2, axis=1)
        out = np.zeros(len(xs), dtype=complex)
        mask = self._inside(r2)
        R2 = self.radius**2
        out[mask] = np.exp(1.0 - R2 / (R2 - r2[mask]))
        return out

    def gradient_values(self, xs):
        xs = np.atleast_2d(xs)
        r2 = np.sum(xs**2, axis=1)
        out = np.zeros(xs.shape, dtype=complex)
        mask = self._inside(r2)
        R2 = self.radius**2
        u = np.exp(1.0 - R2 / (R2 - r2[mask]))
        out[mask] = (-2.0 * R2 / (R2 - r2[mask])[:, None] ** 2) * xs[mask] * u[:, None]
        return out

    def radial_profile(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        mask = self._inside(r**2)
        R2 = self.radius**2
        out[mask] = np.exp(1.0 - R2 / (R2 - r[mask] ** 2))
        return out

    @property
    def support_radius(self):
        return self.radius

    @property
    def is_radial(self):
        return True

    def modulus_field(self):
        return self

    def derivative_sups(self):
        # numeric scan of the radial profile, with margin; cached
        if self._sups is None:
            r = np.linspace(0.0, self.radius * (1 - 1e-6), 20001)
            f = self.radial_profile(r)
            h = r[1] - r[0]
            d1 = np.gradient(f, h)
            d2 = np.gradient(d1, h)
            tang = np.abs(d1[1:] / r[1:])
            m2 = max(np.max(np.abs(d2)), np.max(tang))
            self._sups = (1.0, 1.3 * float(np.max(np.abs(d1))), 1.3 * float(m2))
        return self._sups


class PlaneWaveField(ScalarField):
    """Plane wave exp(i k.x) under a gaussian envelope of width w."""

    kind = "planewave"
    analytic_gradient = True

    def __init__(self, dimension: int, freq, width: float = 1.0):
        super().__init__(dimension)
        freq = np.atleast_1d(np.asarray(freq, dtype=float))
        if freq.size != dimension:
            raise DimensionMismatch("frequency vector must match the dimension")
        if width <= 0:
            raise InvalidParams("envelope width must be positive")
        self.freq = freq
        self.width = float(width)

    def values(self, xs):
        xs = np.atleast_2d(xs)
        return np.exp(1j * xs @ self.freq - np.sum(xs**2, axis=1) / self.width**2)

    def gradient_values(self, xs):
        xs = np.atleast_2d(xs)
        u = self.values(xs)
        return (1j * self.freq[None, :] - 2.0 * xs / self.width**2) * u[:, None]

    def closed_lp_norm(self, p):
        return (math.pi * self.width**2 / p) ** (self.dimension / 2.0)

    def radial_profile(self, r):
        return np.exp(-np.asarray(r) ** 2 / self.width**2)

    def modulus_field(self):
        return GaussianField(self.dimension, self.width)

    def derivative_sups(self):
        w, k = self.width, float(np.linalg.norm(self.freq))
        r = np.linspace(0.0, 12.0 * w, 4001)
        g = np.exp(-(r**2) / w**2)
        m1 = np.max(np.sqrt(k**2 + 4 * r**2 / w**4) * g)
        m2 = np.max(((k + 2 * r / w**2) ** 2 + 2.0 / w**2) * g)
        return 1.0, 1.1 * float(m1), 1.1 * float(m2)


class IndicatorField(ScalarField):
    """Characteristic function of a catalog region."""

    kind = "indicator"
    analytic_gradient = False

    def __init__(self, region: SetRegion):
        super().__init__(region.dimension)
        self.region = region

    def values(self, xs):
        return self.region.contains(xs).astype(complex)

    def closed_lp_norm(self, p):
        return self.region.measure()

    @property
    def support_radius(self):
        return self.region.bounding_radius()

    @property
    def is_radial(self):
        return (
            isinstance(self.region, BallRegion)
            and float(np.linalg.norm(self.region.center)) == 0.0
        )

    def modulus_field(self):
        return self


class CustomField(ScalarField):
    """Host-provided evaluation callback; excluded from golden-value tests."""

    kind = "custom"

    def __init__(
        self,
        dimension: int,
        func: Callable[[np.ndarray], np.ndarray],
        grad: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        lp_norms: Optional[dict] = None,
        support_radius: Optional[float] = None,
        profile: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ):
        super().__init__(dimension)
        self._func = func
        self._grad = grad
        self._lp_norms = dict(lp_norms or {})
        self._support = support_radius
        self._profile = profile
        self.analytic_gradient = grad is not None

    def values(self, xs):
        return np.asarray(self._func(np.atleast_2d(xs)), dtype=complex)

    def gradient_values(self, xs):
        if self._grad is None:
            raise GradientUnavailable("custom field was built without a gradient callback")
        return np.asarray(self._grad(np.atleast_2d(xs)), dtype=complex)

    def closed_lp_norm(self, p):
        return self._lp_norms.get(p)

    def radial_profile(self, r):
        return None if self._profile is None else np.asarray(self._profile(np.asarray(r)))

    @property
    def support_radius(self):
        return self._support

    def modulus_field(self):
        return CustomField(
            self.dimension,
            lambda xs: np.abs(self._func(xs)),
            lp_norms=self._lp_norms,
            support_radius=self._support,
            profile=self._profile,
        )


def zero_field(dimension: int) -> CustomField:
    """The zero function, handy for degenerate-input tests."""
    return CustomField(
        dimension,
        lambda xs: np.zeros(len(np.atleast_2d(xs)), dtype=complex),
        grad=lambda xs: np.zeros(np.atleast_2d(xs).shape, dtype=complex),
        lp_norms={},
        support_radius=1.0,
        profile=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
    )


# ---------------------------------------------------------------------------
# vector potentials
# ---------------------------------------------------------------------------


class VectorPotential:
    kind = "custom"

    def __init__(self, dimension: int):
        self.dimension = int(dimension)

    def values(self, xs) -> np.ndarray:
        raise NotImplementedError

    def local_bound(self, radius: float) -> float:
        """Upper bound for sup |A(x)| over the ball of the given radius."""
        raise NotImplementedError

    @property
    def is_zero(self) -> bool:
        return False


class ZeroPotential(VectorPotential):
    kind = "zero"

    def values(self, xs):
        return np.zeros(np.atleast_2d(xs).shape)

    def local_bound(self, radius):
        return 0.0

    @property
    def is_zero(self):
        return True


class ConstantPotential(VectorPotential):
    kind = "constant"

    def __init__(self, vec):
        vec = np.atleast_1d(np.asarray(vec, dtype=float))
        super().__init__(vec.size)
        self.vec = vec

    def values(self, xs):
        xs = np.atleast_2d(xs)
        return np.broadcast_to(self.vec, xs.shape).copy()

    def local_bound(self, radius):
        return float(np.linalg.norm(self.vec))


class RotationalPotential(VectorPotential):
    """A(x) = (b/2) (-x2, x1, 0, ...); needs n >= 2, unbounded at infinity."""

    kind = "rotational"

    def __init__(self, strength: float, dimension: int):
        if dimension < 2:
            raise InvalidParams("rotational potential needs dimension >= 2")
        super().__init__(dimension)
        self.strength = float(strength)

    def values(self, xs):
        xs = np.atleast_2d(xs)
        out = np.zeros(xs.shape)
        out[:, 0] = -0.5 * self.strength * xs[:, 1]
        out[:, 1] = 0.5 * self.strength * xs[:, 0]
        return out

    def local_bound(self, radius):
        return 0.5 * abs(self.strength) * radius


class OscillatoryPotential(VectorPotential):
    """A_j(x) = amplitude * sin(frequency * x_j); globally bounded."""

    kind = "oscillatory"

    def __init__(self, amplitude: float, frequency: float, dimension: int):
        super().__init__(dimension)
        self.amplitude = float(amplitude)
        self.frequency = float(frequency)

    def values(self, xs):
        return self.amplitude * np.sin(self.frequency * np.atleast_2d(xs))

    def local_bound(self, radius):
        return abs(self.amplitude) * math.sqrt(self.dimension)


class CustomPotential(VectorPotential):
    kind = "custom"

    def __init__(self, dimension: int, func, bound: Callable[[float], float]):
        super().__init__(dimension)
        self._func = func
        self._bound = bound

    def values(self, xs):
        return np.asarray(self._func(np.atleast_2d(xs)), dtype=float)

    def local_bound(self, radius):
        return float(self._bound(radius))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def _check_point(obj, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if x.shape != (obj.dimension,):
        raise DimensionMismatch(
            f"point of length {x.shape} does not match dimension {obj.dimension}"
        )
    return x


def eval_field(field: ScalarField, x) -> complex:
    x = _check_point(field, x)
    val = complex(field.values(x[None, :])[0])
    if not (math.isfinite(val.real) and math.isfinite(val.imag)):
        raise NonIntegrableField("field evaluation produced a non-finite value")
    return val


def eval_potential(potential: VectorPotential, x) -> np.ndarray:
    x = _check_point(potential, x)
    out = potential.values(x[None, :])[0]
    if not np.all(np.isfinite(out)):
        raise NonIntegrableField("potential evaluation produced a non-finite value")
    return out


def lp_norm_quadrature(field: ScalarField, p: float) -> tuple:
    """Quadrature estimate of ||u||_p^p with a crude reported error."""
    n = field.dimension
    prof_probe = field.radial_profile(np.array([0.5]))
    if prof_probe is not None:
        outer = field.support_radius or 60.0
        r, w = panel_rule(geometric_edges(1e-9, outer, 2.0), 14)
        f = field.radial_profile(r)
        val = sphere_area(n) * float(np.sum(w * f**p * r ** (n - 1)))
        r2, w2 = panel_rule(geometric_edges(1e-9, outer, 4.0), 14)
        f2 = field.radial_profile(r2)
        val2 = sphere_area(n) * float(np.sum(w2 * f2**p * r2 ** (n - 1)))
        return val2, abs(val2 - val) + 1e-12 * abs(val2)
    if field.support_radius is None or n > 2:
        raise NonIntegrableField("no quadrature route for this field")
    pts, wts = panel_rule(np.linspace(-field.support_radius, field.support_radius, 33), 10)
    if n == 1:
        vals = np.abs(field.values(pts[:, None])) ** p
        v = float(np.sum(wts * vals))
        return v, 1e-6 * abs(v)
    xx, yy = np.meshgrid(pts, pts, indexing="ij")
    grid = np.column_stack([xx.ravel(), yy.ravel()])
    vals = np.abs(field.values(grid)) ** p
    v = float(np.sum((wts[:, None] * wts[None, :]).ravel() * vals))
    return v, 1e-6 * abs(v)


def field_lp_norm_p(field: ScalarField, p: float) -> float:
    """||u||_p^p, exact when the catalog provides a closed form."""
    closed = field.closed_lp_norm(p)
    if closed is not None:
        return closed
    return lp_norm_quadrature(field, p)[0]


def magnetic_gradient(field: ScalarField, potential: VectorPotential, x) -> np.ndarray:
    """grad u(x) - i A(x) u(x), componentwise."""
    if not field.analytic_gradient:
        raise GradientUnavailable(f"{field.kind} field does not support gradients")
    x = _check_point(field, x)
    grad = field.gradient_values(x[None, :])[0]
    a = potential.values(x[None, :])[0]
    u = field.values(x[None, :])[0]
    return grad - 1j * a * u
