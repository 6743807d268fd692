"""Command-line driver with reproducible configuration and machine-readable
output.

Catalog grammar ("kind:key=value:key=value", keys in fixed order, vector
values comma-separated):

  fields      gaussian:w=1 | bump:r=1 | planewave:k=2,0:w=1
              indicator:ball:r=1[:c=0,0] | indicator:box:lo=-0.5:hi=0.5
  potentials  potential:zero | potential:constant:a=1,0
              potential:rotational:b=2 | potential:oscillatory:amp=1:freq=1

Exit codes: 0 success, 1 verification failure, 2 invalid configuration,
3 engine non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field as _dc_field
from typing import Optional

import numpy as np

from . import analysis, asym
from .errors import EngineNonConvergence, FraclimError, InvalidParams
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
    ScalarField,
    SetRegion,
    VectorPotential,
    ZeroPotential,
)
from .quad import EngineSpec, energy, energy_split, split_total
from .verify import run_verify


def _num(text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise InvalidParams(f"bad number {text!r}") from exc


def _vec(text: str):
    return [_num(t) for t in text.split(",")]


def canon_num(v: float) -> str:
    out = f"{float(v):.12g}"
    return "0" if out in ("-0", "-0.0") else out


def canon_vec(vs) -> str:
    return ",".join(canon_num(v) for v in np.atleast_1d(vs))


def _split_spec(text: str):
    parts = text.strip().split(":")
    head = parts[0]
    kv = {}
    rest = []
    for part in parts[1:]:
        if "=" in part:
            k, v = part.split("=", 1)
            if k in kv:
                raise InvalidParams(f"duplicate key {k!r} in spec {text!r}")
            kv[k] = v
        else:
            rest.append(part)
    return head, rest, kv


def parse_field_spec(text: str, n: int) -> ScalarField:
    kind, rest, kv = _split_spec(text)
    if kind == "gaussian":
        return GaussianField(n, width=_num(kv.get("w", "1")))
    if kind == "bump":
        return BumpField(n, radius=_num(kv.get("r", "1")))
    if kind == "planewave":
        freq = _vec(kv.get("k", canon_vec(np.ones(n))))
        return PlaneWaveField(n, freq, width=_num(kv.get("w", "1")))
    if kind == "indicator":
        return IndicatorField(parse_region_spec(text, n))
    raise InvalidParams(f"unknown field kind {kind!r}")


def parse_region_spec(text: str, n: int) -> SetRegion:
    kind, rest, kv = _split_spec(text)
    if kind == "indicator":
        if not rest:
            raise InvalidParams("indicator spec needs a region kind (ball or box)")
        kind, rest = rest[0], rest[1:]
    if kind == "ball":
        center = _vec(kv["c"]) if "c" in kv else [0.0] * n
        return BallRegion(center, _num(kv.get("r", "1")))
    if kind == "box":
        if "lo" not in kv or "hi" not in kv:
            raise InvalidParams("box spec needs lo= and hi=")
        return BoxRegion(_vec(kv["lo"]), _vec(kv["hi"]))
    raise InvalidParams(f"unknown region kind {kind!r}")


def parse_potential_spec(text: str, n: int) -> VectorPotential:
    kind, rest, kv = _split_spec(text)
    if kind == "potential":
        if not rest:
            raise InvalidParams("potential spec needs a kind")
        kind, rest = rest[0], rest[1:]
    if kind == "zero":
        return ZeroPotential(n)
    if kind == "constant":
        vec = _vec(kv.get("a", "1"))
        if len(vec) == 1 and n > 1:
            raise InvalidParams("constant potential vector must match the dimension")
        return ConstantPotential(vec)
    if kind == "rotational":
        return RotationalPotential(_num(kv.get("b", "1")), n)
    if kind == "oscillatory":
        return OscillatoryPotential(_num(kv.get("amp", "1")), _num(kv.get("freq", "1")), n)
    raise InvalidParams(f"unknown potential kind {kind!r}")


def canonical_field_spec(field: ScalarField) -> str:
    if isinstance(field, GaussianField):
        return f"gaussian:w={canon_num(field.width)}"
    if isinstance(field, BumpField):
        return f"bump:r={canon_num(field.radius)}"
    if isinstance(field, PlaneWaveField):
        return f"planewave:k={canon_vec(field.freq)}:w={canon_num(field.width)}"
    if isinstance(field, IndicatorField):
        return "indicator:" + canonical_region_spec(field.region)
    raise InvalidParams("field has no canonical spec string")


def canonical_region_spec(region: SetRegion) -> str:
    if isinstance(region, BallRegion):
        spec = f"ball:r={canon_num(region.radius)}"
        if np.any(region.center != 0.0):
            spec += f":c={canon_vec(region.center)}"
        return spec
    if isinstance(region, BoxRegion):
        return f"box:lo={canon_vec(region.lo)}:hi={canon_vec(region.hi)}"
    raise InvalidParams("region has no canonical spec string")


def canonical_potential_spec(pot: VectorPotential) -> str:
    if isinstance(pot, ZeroPotential):
        return "potential:zero"
    if isinstance(pot, ConstantPotential):
        return f"potential:constant:a={canon_vec(pot.vec)}"
    if isinstance(pot, RotationalPotential):
        return f"potential:rotational:b={canon_num(pot.strength)}"
    if isinstance(pot, OscillatoryPotential):
        return (
            f"potential:oscillatory:amp={canon_num(pot.amplitude)}"
            f":freq={canon_num(pot.frequency)}"
        )
    raise InvalidParams("potential has no canonical spec string")


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    command: str
    field: str = "gaussian:w=1"
    potential: str = "potential:zero"
    n: int = 1
    p: float = 2.0
    s: Optional[float] = None
    s_grid: Optional[list] = None
    method: str = "mc"
    budget: int = 1_000_000
    seed: int = 0
    shards: int = 4
    r_min: float = 1e-6
    r_max: Optional[float] = None
    norm_flavor: str = "euclid"
    model: str = "s_log_s"
    profile: str = "quick"
    out: Optional[str] = None
    format: str = "json"

    def canonical(self) -> "RunConfig":
        cfg = RunConfig(**asdict(self))
        cfg.field = canonical_field_spec(parse_field_spec(self.field, self.n))
        cfg.potential = canonical_potential_spec(parse_potential_spec(self.potential, self.n))
        return cfg

    def engine(self) -> EngineSpec:
        return EngineSpec(
            method=self.method,
            mc_budget=self.budget,
            mc_seed=self.seed,
            mc_shards=self.shards,
            r_min=self.r_min,
            r_max=self.r_max,
        )

    def to_dict(self) -> dict:
        return asdict(self)


def _apply_config_file(args, parser):
    if not getattr(args, "config", None):
        return args
    with open(args.config) as fh:
        file_vals = json.load(fh)
    for key, val in file_vals.items():
        if key == "command":
            continue
        if not hasattr(args, key):
            raise InvalidParams(f"unknown config key {key!r}")
        # explicit flags win over config-file values
        if parser.get_default(key) == getattr(args, key):
            setattr(args, key, val)
    return args


def _write_text(path: Optional[str], text: str):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def scan_csv_text(rows) -> str:
    lines = ["s,energy,stat_error,trunc_error,scaled"]
    for r in rows:
        lines.append(
            ",".join(
                canon_num(v)
                for v in (r.s, r.energy.value, r.energy.stat_error, r.energy.trunc_error, r.scaled)
            )
        )
    return "\n".join(lines) + "\n"


def _json_text(config: RunConfig, results) -> str:
    payload = {"config": config.canonical().to_dict(), "results": results}
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _estimate_dict(est) -> dict:
    return {
        "value": est.value,
        "stat_error": est.stat_error,
        "trunc_error": est.trunc_error,
        "method": est.method,
        "budget": est.budget,
        "seed": est.seed,
    }


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_constants(cfg: RunConfig) -> int:
    s_list = cfg.s_grid or ([cfg.s] if cfg.s is not None else [0.5])
    rows = []
    for s in s_list:
        Params(cfg.n, cfg.p, s)  # range validation
        rows.append(
            {
                "n": cfg.n,
                "p": cfg.p,
                "s": s,
                "ms_constant": asym.ms_constant(cfg.n, cfg.p),
                "bbm_constant": asym.bbm_constant(cfg.p, cfg.n),
                "cns_normalization": asym.cns_normalization(cfg.n, s),
            }
        )
    if cfg.format == "csv":
        lines = ["n,p,s,ms_constant,bbm_constant,cns_normalization"]
        for r in rows:
            lines.append(
                ",".join(
                    canon_num(r[k])
                    for k in ("n", "p", "s", "ms_constant", "bbm_constant", "cns_normalization")
                )
            )
        _write_text(cfg.out, "\n".join(lines) + "\n")
    else:
        _write_text(cfg.out, _json_text(cfg, rows))
    return 0


def cmd_energy(cfg: RunConfig) -> int:
    if cfg.s is None:
        raise InvalidParams("energy command needs --s")
    field = parse_field_spec(cfg.field, cfg.n)
    pot = parse_potential_spec(cfg.potential, cfg.n)
    params = Params(cfg.n, cfg.p, cfg.s, cfg.norm_flavor)
    if cfg.method == "split":
        parts = energy_split(field, pot, params, cfg.engine())
        results = {tag: _estimate_dict(est) for tag, est in parts.items()}
        results["total_from_split"] = _estimate_dict(split_total(parts))
    else:
        results = _estimate_dict(energy(field, pot, params, cfg.engine()))
    _write_text(cfg.out, _json_text(cfg, results))
    return 0


def cmd_scan(cfg: RunConfig) -> int:
    if not cfg.s_grid:
        raise InvalidParams("scan command needs --s-grid")
    field = parse_field_spec(cfg.field, cfg.n)
    pot = parse_potential_spec(cfg.potential, cfg.n)
    rows = asym.scan(field, pot, cfg.n, cfg.p, cfg.s_grid, cfg.engine(), cfg.norm_flavor)
    endpoint = 0 if cfg.s_grid[0] > cfg.s_grid[-1] else 1
    fit = asym.extrapolate(rows, target=endpoint, model=cfg.model) if len(rows) >= 3 else None
    if cfg.format == "csv":
        _write_text(cfg.out, scan_csv_text(rows))
    else:
        results = {
            "rows": [
                {"s": r.s, "scaled": r.scaled, "energy": _estimate_dict(r.energy)}
                for r in rows
            ],
            "fit": None
            if fit is None
            else {
                "limit": fit.limit,
                "model": fit.model,
                "coefficients": list(fit.coefficients),
                "residual": fit.residual,
            },
        }
        _write_text(cfg.out, _json_text(cfg, results))
    return 0


def cmd_perimeter(cfg: RunConfig) -> int:
    region = parse_region_spec(cfg.field, cfg.n)
    pot = parse_potential_spec(cfg.potential, cfg.n)
    if cfg.s_grid:
        rep = analysis.perimeter_limit_scan(region, pot, cfg.s_grid, cfg.engine(), model=cfg.model)
        results = {
            "limit": rep.fit.limit,
            "model": rep.fit.model,
            "residual": rep.fit.residual,
            "region_measure": rep.region_measure,
            "implied_value": rep.implied_value,
            "displayed_value": rep.displayed_value,
            "supported": rep.supported,
        }
        _write_text(cfg.out, _json_text(cfg, results))
        return 0
    if cfg.s is None:
        raise InvalidParams("perimeter command needs --s or --s-grid")
    est = analysis.perimeter_ps(region, pot, cfg.s, cfg.engine())
    _write_text(cfg.out, _json_text(cfg, _estimate_dict(est)))
    return 0


def cmd_audit(cfg: RunConfig) -> int:
    field = parse_field_spec(cfg.field, cfg.n)
    pot = parse_potential_spec(cfg.potential, cfg.n)
    rep = analysis.diamagnetic_audit(field, pot, cfg.n, cfg.budget, seed=cfg.seed)
    results = {
        "samples": rep.samples,
        "violations": rep.violations,
        "worst_margin": rep.worst_margin,
        "seed": rep.seed,
    }
    _write_text(cfg.out, _json_text(cfg, results))
    return 0 if rep.violations == 0 else 1


def cmd_verify(cfg: RunConfig) -> int:
    return run_verify(profile=cfg.profile, out=cfg.out)


COMMANDS = {
    "constants": cmd_constants,
    "energy": cmd_energy,
    "scan": cmd_scan,
    "perimeter": cmd_perimeter,
    "audit": cmd_audit,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fraclim",
        description="Magnetic fractional energies, s-perimeters and singular limits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="JSON config file (flags override)")
        sp.add_argument("--field", default="gaussian:w=1")
        sp.add_argument("--potential", default="potential:zero")
        sp.add_argument("--n", type=int, default=1)
        sp.add_argument("--p", type=float, default=2.0)
        sp.add_argument("--s", type=float, default=None)
        sp.add_argument("--s-grid", dest="s_grid", default=None,
                        help='comma separated, e.g. "0.4,0.2,0.1"')
        sp.add_argument("--method", choices=("mc", "det", "split"), default="mc")
        sp.add_argument("--budget", type=int, default=1_000_000)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--shards", type=int, default=4)
        sp.add_argument("--r-min", dest="r_min", type=float, default=1e-6)
        sp.add_argument("--r-max", dest="r_max", type=float, default=None)
        sp.add_argument("--norm-flavor", dest="norm_flavor",
                        choices=("euclid", "split_p"), default="euclid")
        sp.add_argument("--model", choices=("linear_in_s", "s_log_s", "richardson"),
                        default="s_log_s")
        sp.add_argument("--profile", choices=("quick", "full"), default="quick")
        sp.add_argument("--out", default=None)
        sp.add_argument("--format", choices=("csv", "json"), default="json")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config_file(args, parser)
        s_grid = args.s_grid
        if isinstance(s_grid, str):
            s_grid = [_num(t) for t in s_grid.split(",") if t.strip()]
        cfg = RunConfig(
            command=args.command,
            field=args.field,
            potential=args.potential,
            n=args.n,
            p=args.p,
            s=args.s,
            s_grid=s_grid,
            method=args.method,
            budget=args.budget,
            seed=args.seed,
            shards=args.shards,
            r_min=args.r_min,
            r_max=args.r_max,
            norm_flavor=args.norm_flavor,
            model=args.model,
            profile=args.profile,
            out=args.out,
            format=args.format,
        )
        return COMMANDS[cfg.command](cfg)
    except EngineNonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FraclimError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
