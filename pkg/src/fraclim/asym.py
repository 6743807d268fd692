"""Exact limit constants, the kernel normalization, s-scans and extrapolation.

The two singular limits under study:

  * s -> 0:  s * E_s  ->  (4 pi^(n/2) / (p Gamma(n/2))) ||u||_p^p,
  * s -> 1:  (1-s) * E_s  ->  Q_{p,n} * int |grad u - i A u|_p^p.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import GradientUnavailable, InvalidParams
from .gridquad import box_rule, geometric_edges, panel_rule
from .kernel import complex_pnorm
from .model import EnergyEstimate, LimitFit, Params, ScalarField, VectorPotential
from .quad import EngineSpec, energy, worker_count
from .special import sphere_area

EXTRAPOLATION_MODELS = ("linear_in_s", "s_log_s", "richardson")


@dataclass(frozen=True)
class ScanRow:
    """One grid point of an s-scan with the endpoint-scaled value."""

    s: float
    energy: EnergyEstimate
    scaled: float


def ms_constant(n: int, p: float) -> float:
    """Vanishing-order limit constant 4 pi^(n/2) / (p Gamma(n/2))."""
    if n < 1 or p < 1:
        raise InvalidParams("need n >= 1 and p >= 1")
    return 4.0 * math.pi ** (n / 2.0) / (p * math.gamma(n / 2.0))


def bbm_constant(p: float, n: int) -> float:
    """Sphere average Q_{p,n} = (1/p) int_{S^(n-1)} |omega . h|^p dH(h).

    For n = 1 the sphere is two points and the value is 2/p exactly; for
    n >= 2 the polar-angle reduction gives a Beta-function closed form,
    independent of the reference direction omega.
    """
    if n < 1 or p < 1:
        raise InvalidParams("need n >= 1 and p >= 1")
    if n == 1:
        return 2.0 / p
    return (
        2.0
        * math.pi ** ((n - 1) / 2.0)
        * math.gamma((p + 1.0) / 2.0)
        / (p * math.gamma((p + n) / 2.0))
    )


def bbm_constant_quadrature(p: float, n: int, omega=None) -> float:
    """Direct sphere-quadrature route for Q_{p,n}, cross-checking the closed
    form.  For n = 2 the circle integral is computed with panels split at the
    zeros of omega . h, so the value is independent of omega to rounding."""
    if n == 1:
        return 2.0 / p
    if n == 2:
        alpha = 0.0
        if omega is not None:
            omega = np.asarray(omega, dtype=float)
            alpha = math.atan2(omega[1], omega[0])
        kinks = (alpha - math.pi / 2.0, alpha + math.pi / 2.0)
        total = 0.0
        for k0, k1 in ((kinks[0], kinks[1]), (kinks[1], kinks[0] + 2.0 * math.pi)):
            mid = 0.5 * (k0 + k1)
            half = 0.5 * (k1 - k0)
            # grade toward both kinks, where |cos|^p loses smoothness
            g = half * np.concatenate([[0.0], np.geomspace(1e-8, 1.0, 24)])
            edges = np.concatenate([mid - g[::-1], mid + g[1:]])
            th, w = panel_rule(edges, 12)
            total += float(np.sum(w * np.abs(np.cos(th - alpha)) ** p))
        return total / p
    # n >= 3: polar reduction, t = omega . h with density (1 - t^2)^((n-3)/2)
    g = np.concatenate([[0.0], np.geomspace(1e-10, 1.0, 40)])
    edges = np.concatenate([-g[::-1], g[1:]])
    t, w = panel_rule(edges, 12)
    dens = np.clip(1.0 - t**2, 0.0, None) ** ((n - 3) / 2.0)
    val = sphere_area(n - 1) * float(np.sum(w * np.abs(t) ** p * dens))
    return val / p


def cns_normalization(n: int, s: float) -> float:
    """Normalization of the fractional (magnetic) Laplacian,
    c(n,s) = s 2^(2s) Gamma((n+2s)/2) / (pi^(n/2) Gamma(1-s)),
    satisfying c/s -> Gamma(n/2)/pi^(n/2) as s -> 0 and
    c/(1-s) -> 2n Gamma(n/2)/pi^(n/2) as s -> 1."""
    if not 0.0 < s < 1.0:
        raise InvalidParams("s must lie in (0, 1)")
    return (
        s
        * 2.0 ** (2.0 * s)
        * math.gamma((n + 2.0 * s) / 2.0)
        / (math.pi ** (n / 2.0) * math.gamma(1.0 - s))
    )


def gaussian_reference_energy(n: int, s: float) -> float:
    """Exact p = 2, A = 0 energy of the unit gaussian exp(-|x|^2), via the
    Fourier identity ||(-Lap)^(s/2) u||^2 = (c(n,s)/2) [u]^2_{s,2}:

      E = (2 / c(n,s)) 2^(-n) |S^(n-1)| 2^(s + n/2 - 1) Gamma(s + n/2).
    """
    if n not in (1, 2, 3):
        raise InvalidParams("reference energy provided for n in {1, 2, 3}")
    if not 0.0 < s < 1.0:
        raise InvalidParams("s must lie in (0, 1)")
    return (
        (2.0 / cns_normalization(n, s))
        * 2.0 ** (-n)
        * sphere_area(n)
        * 2.0 ** (s + n / 2.0 - 1.0)
        * math.gamma(s + n / 2.0)
    )


def magnetic_gradient_energy(
    field: ScalarField,
    potential: VectorPotential,
    p: float,
    flavor: str = "euclid",
) -> float:
    """Quadrature value of int |grad u - i A u|_flavor^p over R^n."""
    if not field.analytic_gradient:
        raise GradientUnavailable(f"{field.kind} field does not expose a gradient")
    n = field.dimension
    if n > 2:
        raise InvalidParams("gradient energy quadrature provided for n <= 2")
    r_eff = field.effective_radius(p, eps=1e-10)
    vals = []
    for panels in (10, 16):
        pts, wts = box_rule(r_eff * 1.05, n, panels, 14)
        v = field.gradient_values(pts) - 1j * potential.values(pts) * field.values(pts)[:, None]
        mods = complex_pnorm(v, p, flavor, vector=True)
        vals.append(float(np.sum(wts * mods**p)))
    if abs(vals[1] - vals[0]) > 1e-6 * max(abs(vals[1]), 1e-300) + 1e-12:
        pts, wts = box_rule(r_eff * 1.05, n, 24, 14)
        v = field.gradient_values(pts) - 1j * potential.values(pts) * field.values(pts)[:, None]
        mods = complex_pnorm(v, p, flavor, vector=True)
        vals.append(float(np.sum(wts * mods**p)))
    return vals[-1]


def _scan_endpoint(s_grid: Sequence[float]) -> int:
    s_grid = list(s_grid)
    if any(not 0.0 < s < 1.0 for s in s_grid):
        raise InvalidParams("scan grid must lie in (0, 1)")
    if len(s_grid) >= 2:
        diffs = np.diff(s_grid)
        if np.all(diffs < 0):
            return 0
        if np.all(diffs > 0):
            return 1
        raise InvalidParams("scan grid must be strictly monotone toward an endpoint")
    return 0


def scan(
    field: ScalarField,
    potential: VectorPotential,
    n: int,
    p: float,
    s_grid: Sequence[float],
    engine: EngineSpec,
    norm_flavor: str = "euclid",
    endpoint: Optional[int] = None,
) -> list:
    """One energy evaluation per grid point, with the endpoint-scaled column
    (s * E for scans toward 0, (1-s) * E toward 1)."""
    s_grid = list(s_grid)
    if not s_grid:
        return []
    if endpoint is None:
        endpoint = _scan_endpoint(s_grid)

    def one(s):
        params = Params(n=n, p=p, s=s, norm_flavor=norm_flavor)
        est = energy(field, potential, params, engine)
        scale = s if endpoint == 0 else (1.0 - s)
        return ScanRow(s=s, energy=est, scaled=scale * est.value)

    workers = worker_count()
    if workers > 1 and len(s_grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, s_grid))
    return [one(s) for s in s_grid]


def _neville_to_zero(sigma, y):
    tab = [list(y)]
    cur = list(y)
    for k in range(1, len(y)):
        nxt = []
        for i in range(len(y) - k):
            nxt.append(cur[i + 1] + (cur[i] - cur[i + 1]) * (0.0 - sigma[i + k]) / (sigma[i] - sigma[i + k]))
        tab.append(nxt)
        cur = nxt
    return cur[0], tab


def extrapolate(rows: Sequence[ScanRow], target: int, model: str = "s_log_s") -> LimitFit:
    """Extrapolate the scaled column to the target endpoint (0 or 1).

    Models: linear_in_s (L + a sigma), s_log_s (L + a sigma + b sigma log sigma,
    the default), richardson (polynomial extrapolation through all points).
    sigma is the distance of s to the endpoint.
    """
    if model not in EXTRAPOLATION_MODELS:
        raise InvalidParams(f"unknown extrapolation model {model!r}")
    if target not in (0, 1):
        raise InvalidParams("target endpoint must be 0 or 1")
    rows = list(rows)
    if len(rows) < 3:
        raise InvalidParams("extrapolation needs at least 3 scan rows")
    s_vals = np.array([r.s for r in rows])
    sigma = s_vals if target == 0 else 1.0 - s_vals
    if len(np.unique(sigma)) < 3:
        raise InvalidParams("extrapolation design is rank deficient")
    diffs = np.diff(sigma)
    if not (np.all(diffs < 0) or np.all(diffs > 0)):
        raise InvalidParams("scan grid must be monotone toward the endpoint")
    y = np.array([r.scaled for r in rows])

    if model == "richardson":
        limit, tab = _neville_to_zero(list(sigma), list(y))
        residual = abs(tab[-1][0] - tab[-2][0]) if len(tab) >= 2 else 0.0
        coeffs = tuple(tab[-1] + tab[-2]) if len(tab) >= 2 else (limit,)
        return LimitFit(
            limit=float(limit),
            coefficients=tuple(float(c) for c in coeffs),
            residual=float(residual),
            s_grid=tuple(float(s) for s in s_vals),
            model=model,
        )

    cols = [np.ones_like(sigma), sigma]
    if model == "s_log_s":
        cols.append(sigma * np.log(sigma))
    design = np.column_stack(cols)
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        raise InvalidParams("extrapolation design is rank deficient")
    resid = y - design @ coef
    return LimitFit(
        limit=float(coef[0]),
        coefficients=tuple(float(c) for c in coef),
        residual=float(np.sqrt(np.mean(resid**2))),
        s_grid=tuple(float(s) for s in s_vals),
        model=model,
    )
