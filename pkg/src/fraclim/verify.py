"""Acceptance matrix: runnable checks behind `fraclim verify` and the
acceptance test module.

Each criterion compares a measured quantity against its target at a pinned
tolerance and prints one PASS/FAIL line.  The quick profile trims Monte
Carlo budgets for smoke runs; the full profile runs everything at the
stated fidelity.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field as _dc_field
from typing import Callable, Optional

import numpy as np

from . import analysis, asym
from .gridquad import geometric_edges, panel_rule
from .model import (
    BallRegion,
    BoxRegion,
    BumpField,
    ConstantPotential,
    GaussianField,
    IndicatorField,
    OscillatoryPotential,
    Params,
    PlaneWaveField,
    RotationalPotential,
    ZeroPotential,
    field_lp_norm_p,
)
from .quad import (
    EngineSpec,
    _build_problem,
    _det_mid,
    energy_det,
    energy_mc,
    energy_split,
    split_total,
    tail_bound,
)

VERIFY_SEED = 20240809


@dataclass
class CriterionResult:
    check_id: str
    passed: bool
    measured: float
    target: float
    tolerance: str
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.check_id}: measured={self.measured:.6g} "
            f"target={self.target:.6g} tol={self.tolerance}"
            + (f" ({self.detail})" if self.detail else "")
            + f" [{self.seconds:.1f}s]"
        )

    def to_dict(self) -> dict:
        return {
            "id": self.check_id,
            "passed": self.passed,
            "measured": self.measured,
            "target": self.target,
            "tolerance": self.tolerance,
            "detail": self.detail,
            "seconds": round(self.seconds, 3),
        }


def _gauss1() -> GaussianField:
    return GaussianField(1)


MS_GRID = (0.4, 0.2, 0.1, 0.05, 0.025)
BBM_GRID = (0.6, 0.8, 0.9, 0.95)


def _ms_target() -> float:
    u = _gauss1()
    return asym.ms_constant(1, 2.0) * field_lp_norm_p(u, 2.0)


def check_ms_limit_gaussian(profile: str) -> CriterionResult:
    u = _gauss1()
    rows = asym.scan(u, ZeroPotential(1), 1, 2.0, list(MS_GRID), EngineSpec(method="det"))
    fit = asym.extrapolate(rows, target=0, model="richardson")
    target = _ms_target()
    rel = abs(fit.limit - target) / target
    return CriterionResult(
        "ms-limit-gaussian",
        rel <= 0.02,
        fit.limit,
        target,
        "2% rel",
        f"rel err {rel:.2%}, residual {fit.residual:.2e}",
    )


def check_ms_limit_magnetic(profile: str) -> CriterionResult:
    budget = 4_000_000 if profile == "full" else 1_000_000
    u = _gauss1()
    pot = OscillatoryPotential(1.0, 1.0, 1)
    eng = EngineSpec(method="mc", mc_budget=budget, mc_seed=VERIFY_SEED, mc_shards=4)
    rows = asym.scan(u, pot, 1, 2.0, list(MS_GRID), eng)
    fit = asym.extrapolate(rows, target=0, model="richardson")
    target = _ms_target()
    rel = abs(fit.limit - target) / target
    return CriterionResult(
        "ms-limit-magnetic",
        rel <= 0.03,
        fit.limit,
        target,
        "3% rel",
        f"rel err {rel:.2%}, budget {budget}",
    )


def check_bbm_limit_constant_a(profile: str) -> CriterionResult:
    u = _gauss1()
    pot = ConstantPotential([1.0])
    rows = asym.scan(u, pot, 1, 2.0, list(BBM_GRID), EngineSpec(method="det"))
    fit = asym.extrapolate(rows, target=1, model="richardson")
    target = asym.bbm_constant(2.0, 1) * asym.magnetic_gradient_energy(u, pot, 2.0)
    rel = abs(fit.limit - target) / target
    return CriterionResult(
        "bbm-limit-constant-a",
        rel <= 0.05,
        fit.limit,
        target,
        "5% rel",
        f"rel err {rel:.2%}",
    )


def check_fourier_oracle_agreement(profile: str) -> CriterionResult:
    worst = 0.0
    worst_case = ""
    for n in (1, 2):
        u = GaussianField(n)
        pot = ZeroPotential(n)
        for s in (0.25, 0.5, 0.75):
            est = energy_det(u, pot, Params(n, 2.0, s), EngineSpec(method="det"))
            ref = asym.gaussian_reference_energy(n, s)
            rel = abs(est.value - ref) / ref
            if rel >= worst:
                worst, worst_case = rel, f"(n={n}, s={s})"
    return CriterionResult(
        "fourier-oracle-agreement",
        worst <= 0.01,
        worst,
        0.0,
        "1% rel each",
        f"worst rel err {worst:.1e} at {worst_case}",
    )


def check_cns_asymptotics(profile: str) -> CriterionResult:
    worst_ratio = 0.0
    for n in (1, 2, 3):
        lim0 = math.gamma(n / 2.0) / math.pi ** (n / 2.0)
        lim1 = 2.0 * n * math.gamma(n / 2.0) / math.pi ** (n / 2.0)
        for sigma in (1e-2, 1e-3, 1e-4):
            r0 = abs(asym.cns_normalization(n, sigma) / sigma - lim0) / lim0
            r1 = abs(asym.cns_normalization(n, 1.0 - sigma) / sigma - lim1) / lim1
            worst_ratio = max(worst_ratio, r0 / (10.0 * sigma), r1 / (10.0 * sigma))
    return CriterionResult(
        "cns-asymptotics",
        worst_ratio <= 1.0,
        worst_ratio,
        1.0,
        "rel err <= 10*sigma",
        "worst error / (10 sigma)",
    )


def catalog_pairs():
    """Every catalog (field, potential, n) combination used by the audits."""
    combos = []
    f1 = [
        GaussianField(1),
        BumpField(1),
        PlaneWaveField(1, [2.0]),
        IndicatorField(BoxRegion([-0.5], [0.5])),
    ]
    p1 = [ZeroPotential(1), ConstantPotential([0.7]), OscillatoryPotential(1.0, 1.0, 1)]
    combos += [(f, p, 1) for f in f1 for p in p1]
    f2 = [
        GaussianField(2),
        BumpField(2),
        PlaneWaveField(2, [2.0, 0.0]),
        IndicatorField(BallRegion([0.0, 0.0], 1.0)),
    ]
    p2 = [
        ZeroPotential(2),
        ConstantPotential([0.5, -0.3]),
        OscillatoryPotential(1.0, 1.0, 2),
        RotationalPotential(1.5, 2),
    ]
    combos += [(f, p, 2) for f in f2 for p in p2]
    return combos


def check_diamagnetic_audit(profile: str) -> CriterionResult:
    pairs = 1_000_000 if profile == "full" else 100_000
    total_viol = 0
    worst = math.inf
    count = 0
    for f, p, n in catalog_pairs():
        rep = analysis.diamagnetic_audit(f, p, n, pairs, seed=VERIFY_SEED + count)
        total_viol += rep.violations
        worst = min(worst, rep.worst_margin)
        count += 1
    return CriterionResult(
        "diamagnetic-audit",
        total_viol == 0,
        float(total_viol),
        0.0,
        "0 violations at 1e-12",
        f"{count} combos x {pairs} pairs, worst margin {worst:.1e}",
    )


def split_matrix():
    return [
        (GaussianField(1), ZeroPotential(1), 1, 2.0, 0.25),
        (GaussianField(1), ZeroPotential(1), 1, 2.0, 0.5),
        (GaussianField(1), OscillatoryPotential(1.0, 1.0, 1), 1, 2.0, 0.25),
        (GaussianField(1), ZeroPotential(1), 1, 1.0, 0.5),
        (IndicatorField(BoxRegion([-0.5], [0.5])), ZeroPotential(1), 1, 1.0, 0.5),
        (GaussianField(2), ZeroPotential(2), 2, 2.0, 0.5),
    ]


def check_split_identity(profile: str) -> CriterionResult:
    budget = 400_000 if profile == "full" else 120_000
    worst = 0.0
    ok = True
    for i, (f, pot, n, p, s) in enumerate(split_matrix()):
        eng = EngineSpec(method="split", mc_budget=budget, mc_seed=VERIFY_SEED + i, mc_shards=4)
        parts = energy_split(f, pot, Params(n, p, s), eng)
        tot = split_total(parts)
        eng_mc = EngineSpec(method="mc", mc_budget=budget, mc_seed=VERIFY_SEED + 100 + i, mc_shards=4)
        direct = energy_mc(f, pot, Params(n, p, s), eng_mc)
        allowance = (
            3.0 * math.hypot(tot.stat_error, direct.stat_error)
            + tot.trunc_error
            + direct.trunc_error
        )
        dev = abs(tot.value - direct.value)
        ratio = dev / allowance if allowance > 0 else math.inf
        worst = max(worst, ratio)
        ok = ok and dev <= allowance
    return CriterionResult(
        "split-identity",
        ok,
        worst,
        1.0,
        "|2(mid+far)-total| <= 3 combined errors",
        f"worst deviation/allowance {worst:.2f}",
    )


def check_perimeter_limit(profile: str) -> CriterionResult:
    cases = [
        (BoxRegion([-0.5], [0.5]), ZeroPotential(1)),
        (BallRegion([0.0, 0.0], 1.0), ZeroPotential(2)),
    ]
    worst = 0.0
    flags = []
    ok = True
    for region, pot in cases:
        rep = analysis.perimeter_limit_scan(region, pot, list(MS_GRID))
        rel = abs(rep.fit.limit - rep.implied_value) / rep.implied_value
        worst = max(worst, rel)
        ok = ok and rel <= 0.03 and rep.supported == "theorem_implied"
        flags.append(
            f"n={region.dimension}: limit {rep.fit.limit:.4f}, implied "
            f"{rep.implied_value:.4f}, displayed {rep.displayed_value:.4f}, "
            f"data supports {rep.supported}"
        )
    return CriterionResult(
        "perimeter-limit",
        ok,
        worst,
        0.0,
        "3% rel of oracle-decided constant",
        "; ".join(flags),
    )


def far_mass(field, potential, params, R, r_big=None) -> float:
    """Numerically measured energy mass over |x - y| >= R."""
    engine = EngineSpec(method="det", r_max=max(r_big or 4.0 * R, 2.0 * R))
    prob = _build_problem(field, potential, params, engine)
    prob.delta = R
    mid, _ = _det_mid(prob, engine, level=2)
    return mid + prob.far_val


def check_tail_bound_soundness(profile: str) -> CriterionResult:
    u = _gauss1()
    pot = ZeroPotential(1)
    params = Params(1, 2.0, 0.5)
    worst = 0.0
    ok = True
    details = []
    for R in (5.0, 10.0, 20.0):
        measured = far_mass(u, pot, params, R)
        bound = tail_bound(u, params, R)
        ratio = measured / bound
        worst = max(worst, ratio)
        ok = ok and measured <= bound
        details.append(f"R={R:g}: {measured:.3g} <= {bound:.3g}")
    return CriterionResult(
        "tail-bound-soundness",
        ok,
        worst,
        1.0,
        "measured omitted mass <= tail_bound",
        "; ".join(details),
    )


def check_reproducibility(profile: str) -> CriterionResult:
    import tempfile
    from pathlib import Path

    from .cli import main as cli_main

    with tempfile.TemporaryDirectory() as td:
        out1 = Path(td) / "a.csv"
        out2 = Path(td) / "b.csv"
        args = [
            "scan",
            "--field", "gaussian:w=1",
            "--potential", "potential:oscillatory:amp=1:freq=1",
            "--n", "1", "--p", "2",
            "--s-grid", "0.4,0.2,0.1",
            "--method", "mc", "--budget", "50000",
            "--seed", str(VERIFY_SEED), "--shards", "4",
            "--format", "csv",
        ]
        rc1 = cli_main(args + ["--out", str(out1)])
        rc2 = cli_main(args + ["--out", str(out2)])
        same = out1.read_bytes() == out2.read_bytes()
    return CriterionResult(
        "reproducibility",
        rc1 == 0 and rc2 == 0 and same,
        1.0 if same else 0.0,
        1.0,
        "byte-identical CSV",
        "identical" if same else "outputs differ",
    )


CRITERIA = (
    ("ms-limit-gaussian", check_ms_limit_gaussian),
    ("ms-limit-magnetic", check_ms_limit_magnetic),
    ("bbm-limit-constant-a", check_bbm_limit_constant_a),
    ("fourier-oracle-agreement", check_fourier_oracle_agreement),
    ("cns-asymptotics", check_cns_asymptotics),
    ("diamagnetic-audit", check_diamagnetic_audit),
    ("split-identity", check_split_identity),
    ("perimeter-limit", check_perimeter_limit),
    ("tail-bound-soundness", check_tail_bound_soundness),
    ("reproducibility", check_reproducibility),
)

RUNTIME_LIMITS = {
    "ms-limit-gaussian": 60.0,
    "ms-limit-magnetic": 300.0,
    "bbm-limit-constant-a": 120.0,
    "fourier-oracle-agreement": 120.0,
    "diamagnetic-audit": 60.0,
    "perimeter-limit": 180.0,
}


def run_criterion(check_id: str, profile: str = "quick") -> CriterionResult:
    fn = dict(CRITERIA)[check_id]
    t0 = time.time()
    result = fn(profile)
    result.seconds = time.time() - t0
    limit = RUNTIME_LIMITS.get(check_id)
    if profile == "full" and limit is not None and result.seconds > limit:
        result.passed = False
        result.detail += f"; runtime {result.seconds:.0f}s exceeded {limit:.0f}s"
    return result


def run_verify(profile: str = "quick", out: Optional[str] = None, stream=None) -> int:
    """Run the acceptance matrix; exit 0 iff every check passes."""
    import sys

    stream = stream or sys.stdout
    if profile not in ("quick", "full"):
        raise ValueError("profile must be 'quick' or 'full'")
    results = []
    for check_id, _ in CRITERIA:
        res = run_criterion(check_id, profile)
        results.append(res)
        print(res.line(), file=stream)
    all_pass = all(r.passed for r in results)
    if profile == "full" or out:
        payload = {
            "profile": profile,
            "passed": all_pass,
            "criteria": [r.to_dict() for r in results],
        }
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
        if out:
            with open(out, "w") as fh:
                fh.write(text)
        else:
            print(text, file=stream)
    if not all_pass:
        failing = ", ".join(r.check_id for r in results if not r.passed)
        print(f"FAILED: {failing}", file=stream)
    return 0 if all_pass else 1
