"""Inequality audits and the magnetic nonlocal perimeter.

The perimeter of a bounded region E with potential A is

  P_s(E; A) = 1/2 int_E int_E |1 - e^{i phase}| / |x-y|^(n+s)
            + int_E int_{E^c} 1 / |x-y|^(n+s),

which reduces to the usual fractional perimeter for A = 0 and satisfies
the algebraic identity  E_{s,1,A}(1_E) = 2 P_s(E; A).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import asym
from .errors import InvalidParams
from .gridquad import geometric_edges, half_sphere_directions, linear_rule, panel_rule
from .kernel import complex_pnorm, magnetic_difference
from .model import (
    EnergyEstimate,
    IndicatorField,
    LimitFit,
    Params,
    ScalarField,
    SetRegion,
    VectorPotential,
    field_lp_norm_p,
)
from .quad import EngineSpec, energy
from .special import sphere_area


@dataclass(frozen=True)
class AuditReport:
    samples: int
    violations: int
    worst_margin: float
    seed: int


@dataclass(frozen=True)
class PerimeterLimitReport:
    """Extrapolated s * P_s limit next to the two candidate constants.

    implied_value is (2 pi^(n/2)/Gamma(n/2)) L^n(E), the constant forced by
    the vanishing-order energy limit through E_{s,1,A}(1_E) = 2 P_s;
    displayed_value is (4 pi^(n/2)/Gamma(n/2)) L^n(E).  supported records
    which of the two the scan data lands on.
    """

    fit: LimitFit
    region_measure: float
    implied_value: float
    displayed_value: float
    supported: str


# ---------------------------------------------------------------------------
# diamagnetic audit
# ---------------------------------------------------------------------------


def diamagnetic_audit(
    field: ScalarField,
    potential: VectorPotential,
    n: int,
    sample_count: int = 1_000_000,
    seed: int = 0,
    tolerance: float = 1e-12,
) -> AuditReport:
    """Sample pairs from the effective support ball and check
    ||u(x)| - |u(y)|| <= |u(x) - e^{i phase} u(y)| pointwise."""
    if sample_count < 1:
        raise InvalidParams("sample_count must be >= 1")
    if field.dimension != n or potential.dimension != n:
        raise InvalidParams("field/potential dimension must match n")
    radius = field.effective_radius(1.0) + 1.0
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    worst = math.inf
    violations = 0
    done = 0
    block = 1 << 18
    while done < sample_count:
        m = int(min(block, sample_count - done))
        pts = rng.uniform(-radius, radius, size=(2 * m, n))
        x, y = pts[:m], pts[m:]
        diff = np.atleast_1d(magnetic_difference(field, potential, x, y))
        lhs = np.abs(np.abs(field.values(x)) - np.abs(field.values(y)))
        margin = np.abs(diff) - lhs
        worst = min(worst, float(margin.min()))
        violations += int(np.count_nonzero(margin < -tolerance))
        done += m
    return AuditReport(samples=done, violations=violations, worst_margin=worst, seed=seed)


# ---------------------------------------------------------------------------
# Hardy / Sobolev left-hand sides
# ---------------------------------------------------------------------------


def _sphere_mean_pow(field: ScalarField, r_nodes, q: float):
    """int_{S^(n-1)} |u(r theta)|^q dH(theta) for each radius."""
    n = field.dimension
    prof = field.radial_profile(np.asarray(r_nodes))
    if prof is not None:
        return sphere_area(n) * prof**q
    if n == 1:
        pts = np.concatenate([r_nodes, -np.asarray(r_nodes)])
        vals = np.abs(field.values(pts[:, None])) ** q
        return vals[: len(r_nodes)] + vals[len(r_nodes) :]
    dirs, dw = half_sphere_directions(n, 128)
    out = np.zeros(len(r_nodes))
    for j in range(len(dirs)):
        pts = np.asarray(r_nodes)[:, None] * dirs[j][None, :]
        # field may lack central symmetry: average both hemisphere points
        vals = 0.5 * (np.abs(field.values(pts)) ** q + np.abs(field.values(-pts)) ** q)
        out += dw[j] * vals
    return out


def hardy_lhs(field: ScalarField, s: float, p: float, n: int) -> float:
    """int |u(x)|^p / |x|^(sp) dx, with the origin handled by the radial
    substitution r = t^(1/(n - sp)) that removes the singularity."""
    params = Params(n=n, p=p, s=s)
    params.require_hardy()
    if field.dimension != n:
        raise InvalidParams("field dimension must match n")
    if field_lp_norm_p(field, p) == 0.0:
        return 0.0
    gamma = n - params.sp
    r_out = field.effective_radius(p) * 1.5
    t_nodes, t_wts = panel_rule(np.linspace(0.0, r_out**gamma, 65), 12)
    r_nodes = t_nodes ** (1.0 / gamma)
    shell = _sphere_mean_pow(field, r_nodes, p) / sphere_area(n)
    inner = float(np.sum(t_wts * shell * sphere_area(n))) / gamma
    # smooth exterior part, negligible unless the field has heavy tails
    r2, w2 = panel_rule(geometric_edges(r_out, max(4.0 * r_out, r_out + 1.0), 2.0), 10)
    outer = float(np.sum(w2 * _sphere_mean_pow(field, r2, p) * r2 ** (n - 1.0 - params.sp)))
    return inner + outer


def sobolev_lhs(field: ScalarField, s: float, p: float, n: int) -> float:
    """( int |u|^(np/(n-sp)) dx )^((n-sp)/n)."""
    params = Params(n=n, p=p, s=s)
    params.require_hardy()
    q = n * p / (n - params.sp)
    r_out = field.effective_radius(p) * 2.0
    r, w = panel_rule(geometric_edges(1e-9, r_out, 2.0), 12)
    val = float(np.sum(w * _sphere_mean_pow(field, r, q) * r ** (n - 1.0)))
    return val ** ((n - params.sp) / n)


def hardy_ratio_scan(
    field: ScalarField,
    potential: VectorPotential,
    p: float,
    n: int,
    s_grid: Sequence[float],
    engine: EngineSpec,
    variant: str = "hardy",
) -> list:
    """(s, LHS / E_s) for each grid point; only positivity and finiteness
    are claimed, never the optimal constant."""
    if variant not in ("hardy", "sobolev"):
        raise InvalidParams("variant must be 'hardy' or 'sobolev'")
    if field_lp_norm_p(field, p) == 0.0:
        raise InvalidParams("ratio undefined for the zero field (zero energy)")
    out = []
    for s in s_grid:
        params = Params(n=n, p=p, s=s)
        lhs = hardy_lhs(field, s, p, n) if variant == "hardy" else sobolev_lhs(field, s, p, n)
        est = energy(field, potential, params, engine)
        if est.value <= 0:
            raise InvalidParams("ratio undefined: energy evaluated to zero")
        out.append((s, lhs / est.value))
    return out


# ---------------------------------------------------------------------------
# perimeter
# ---------------------------------------------------------------------------


def _perimeter_directions(region: SetRegion, potential: VectorPotential, fine: bool):
    n = region.dimension
    radial = (
        region.kind == "ball"
        and float(np.linalg.norm(region.center)) == 0.0
        and potential.is_zero
    )
    if n == 1 or radial:
        e1 = np.zeros(n)
        e1[0] = 1.0
        return e1[None, :], np.array([sphere_area(n)])
    panels = 8 if fine else 4
    th, w = linear_rule(0.0, math.pi, panels, 8)
    return np.column_stack([np.cos(th), np.sin(th)]), 2.0 * w


def _perimeter_terms_once(region, potential, s, fine):
    n = region.dimension
    diam = region.diameter()
    dirs, dw = _perimeter_directions(region, potential, fine)
    ppe = 2.0 if fine else 1.0
    redges = geometric_edges(1e-120 * diam, diam, ppe)
    r, rw = panel_rule(redges, 10)
    kern = rw * r ** (n - 1.0) * r ** (-(n + s))
    mix = 0.0
    phase = 0.0
    for j in range(len(dirs)):
        z = r[:, None] * dirs[j][None, :]
        mix += dw[j] * float(np.sum(kern * region.complement_overlap(z)))
        if not potential.is_zero:
            vals = np.zeros(len(r))
            for k in range(len(r)):
                pts, wts = region.overlap_rule(z[k])
                if len(pts) == 0:
                    continue
                phi = -(potential.values(pts + 0.5 * z[k]) @ z[k])
                vals[k] = float(np.sum(wts * np.abs(1.0 - np.exp(1j * phi))))
            phase += dw[j] * float(np.sum(kern * vals))
    # exact exterior tail: beyond the diameter every y = x + z leaves E
    mix += region.measure() * sphere_area(n) * diam ** (-s) / s
    return 0.5 * phase, mix


def perimeter_terms(region: SetRegion, potential: VectorPotential, s: float):
    """(magnetic E x E term, E x E^c interaction term), each refined once."""
    if not 0.0 < s < 1.0:
        raise InvalidParams("s must lie in (0, 1)")
    if region.dimension > 2:
        raise InvalidParams("perimeter quadrature provided for n <= 2")
    coarse = _perimeter_terms_once(region, potential, s, fine=False)
    fine = _perimeter_terms_once(region, potential, s, fine=True)
    err = abs(fine[0] - coarse[0]) + abs(fine[1] - coarse[1])
    return fine[0], fine[1], err


def perimeter_ps(
    region: SetRegion,
    potential: VectorPotential,
    s: float,
    engine: Optional[EngineSpec] = None,
) -> EnergyEstimate:
    """Magnetic s-perimeter of a bounded catalog region."""
    term1, term2, err = perimeter_terms(region, potential, s)
    return EnergyEstimate(
        value=term1 + term2,
        stat_error=0.0,
        trunc_error=err,
        method="det",
        budget=0,
        seed=None,
    )


def perimeter_limit_scan(
    region: SetRegion,
    potential: VectorPotential,
    s_grid: Sequence[float],
    engine: Optional[EngineSpec] = None,
    model: str = "richardson",
) -> PerimeterLimitReport:
    """Extrapolate s * P_s toward s = 0 and report which candidate constant
    the data supports."""
    s_grid = list(s_grid)
    if len(s_grid) < 3 or not all(a > b for a, b in zip(s_grid, s_grid[1:])):
        raise InvalidParams("perimeter scan needs >= 3 s-values decreasing toward 0")
    rows = []
    for s in s_grid:
        est = perimeter_ps(region, potential, s, engine)
        rows.append(asym.ScanRow(s=s, energy=est, scaled=s * est.value))
    fit = asym.extrapolate(rows, target=0, model=model)
    n, measure = region.dimension, region.measure()
    implied = 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0) * measure
    displayed = 4.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0) * measure
    d_imp = abs(fit.limit - implied) / implied
    d_dis = abs(fit.limit - displayed) / displayed
    if min(d_imp, d_dis) > 0.2:
        supported = "inconclusive"
    else:
        supported = "theorem_implied" if d_imp <= d_dis else "paper_displayed"
    return PerimeterLimitReport(
        fit=fit,
        region_measure=measure,
        implied_value=implied,
        displayed_value=displayed,
        supported=supported,
    )
