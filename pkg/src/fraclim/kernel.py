"""Pointwise magnetic difference kernel and the full energy integrand.

All functions accept single points or batches of pair endpoints with shape
(m, n) and are pure, so they are safe under any concurrency.
"""

from __future__ import annotations

import numpy as np

from .errors import DiagonalPoint, DimensionMismatch
from .model import Params, ScalarField, VectorPotential


def _pairs(x, y, dim):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[-1] != dim or y.shape[-1] != dim or x.shape != y.shape:
        raise DimensionMismatch(
            f"pair shapes {x.shape}/{y.shape} do not match dimension {dim}"
        )
    return x, y


def midpoint_phase(potential: VectorPotential, x, y):
    """(x - y) . A((x + y)/2); antisymmetric under swapping x and y."""
    x, y = _pairs(x, y, potential.dimension)
    a = potential.values(0.5 * (x + y))
    out = np.sum((x - y) * a, axis=1)
    return out if out.size > 1 else float(out[0])


def magnetic_difference(field: ScalarField, potential: VectorPotential, x, y):
    """u(x) - exp(i phase) u(y)."""
    x, y = _pairs(x, y, field.dimension)
    phi = np.atleast_1d(midpoint_phase(potential, x, y))
    out = field.values(x) - np.exp(1j * phi) * field.values(y)
    return out if out.size > 1 else complex(out[0])


def complex_pnorm(z, p: float, flavor: str = "euclid", vector: bool = False):
    """Modulus of a complex scalar or complex vector in the chosen flavor.

    For vectors the last axis holds the components.  The split flavor is
    (|Re z|^p + |Im z|^p)^(1/p) with Euclidean norms of the real and
    imaginary parts; it coincides with the usual modulus at p = 2.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    z = np.asarray(z, dtype=complex)
    if flavor == "euclid":
        if vector:
            out = np.sqrt(np.sum(z.real**2 + z.imag**2, axis=-1))
        else:
            out = np.abs(z)
    elif flavor == "split_p":
        if vector:
            re = np.sqrt(np.sum(z.real**2, axis=-1))
            im = np.sqrt(np.sum(z.imag**2, axis=-1))
        else:
            re = np.abs(z.real)
            im = np.abs(z.imag)
        out = (re**p + im**p) ** (1.0 / p)
    else:
        raise ValueError(f"unknown norm flavor {flavor!r}")
    return out if np.ndim(out) else float(out)


def integrand(field: ScalarField, potential: VectorPotential, params: Params, x, y):
    """|u(x) - e^{i phase} u(y)|^p / |x - y|^(n + p s); rejects x = y."""
    x, y = _pairs(x, y, field.dimension)
    dist2 = np.sum((x - y) ** 2, axis=1)
    if np.any(dist2 == 0.0):
        raise DiagonalPoint("integrand is singular on the diagonal x = y")
    diff = np.atleast_1d(magnetic_difference(field, potential, x, y))
    num = complex_pnorm(diff, params.p, params.norm_flavor) ** params.p
    out = num * dist2 ** (-0.5 * (params.n + params.sp))
    return out if out.size > 1 else float(out[0])
