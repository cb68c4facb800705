"""Command line front end: ``hardycert functionals|norm|verify|sweep``.

Exit codes: 0 success, 1 a check failed, 2 bad configuration or arguments.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from . import functionals as fn
from .grid import GridN
from .normest import ascend, max_threads
from .verify import SUITES, run_suite
from .weights import Exponents, Weight, ZoneError, weight_from_dict

EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 1, 2
TRUNCATION_TOL = 0.05

CSV_COLUMNS = [
    "p", "q", "r", "zone", "A1", "A2", "A3", "B1", "B2", "B3", "Bv", "Bw",
    "c_lower", "C_upper", "probe_lower", "ascent", "certified_lo", "certified_hi",
]  # fmt: skip


class ConfigError(ValueError):
    def __init__(self, fld: str, msg: str):
        self.field = fld
        super().__init__(f"config field '{fld}': {msg}")


# ------------------------------------------------------------------ config


@dataclass
class GridSpec:
    x_min: float = 1e-4
    x_max: float = 1e4
    nodes_per_axis: int = 256
    spacing: str = "log"

    def build(self, dims: int) -> GridN:
        if self.spacing == "log":
            return GridN.log(self.x_min, self.x_max, self.nodes_per_axis, dims)
        return GridN.linear(self.x_min, self.x_max, self.nodes_per_axis, dims)

    def widened(self) -> "GridSpec":
        return GridSpec(self.x_min, 2.0 * self.x_max, self.nodes_per_axis, self.spacing)


@dataclass
class RunConfig:
    weight_v: Weight
    weight_w: Weight
    p: float
    q: float
    dims: int = 2
    grid: GridSpec = field(default_factory=GridSpec)
    iters: int = 500
    starts: int = 4
    tol: float = 1e-9
    seed: int = 0
    deltas: tuple[float, ...] = (0.4, 0.2, 0.1)
    s1: float | None = None
    s2: float | None = None
    functionals: list[str] | None = None
    p_range: str | None = None
    q_range: str | None = None

    @property
    def exps(self) -> Exponents:
        return Exponents(self.p, self.q)


def _num(d: dict, key: str, default=None, kind=float):
    if key not in d or d[key] is None:
        if default is None:
            raise ConfigError(key, "missing")
        return default
    try:
        val = kind(d[key])
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected {kind.__name__}, got {d[key]!r}") from None
    if kind is float and not math.isfinite(val):
        raise ConfigError(key, "must be finite")
    return val


def parse_config(d: Any, overrides: argparse.Namespace | None = None) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    if "p" not in d and "p_range" not in d:
        raise ConfigError("p", "missing")
    if "q" not in d and "q_range" not in d:
        raise ConfigError("q", "missing")
    p = _num(d, "p", 2.0)
    q = _num(d, "q", 2.0)
    for name, val in (("p", p), ("q", q)):
        if not val > 1:
            raise ConfigError(name, f"must be > 1, got {val}")
    dims = _num(d, "dims", 2, int)
    if not 1 <= dims <= 4:
        raise ConfigError("dims", f"must be in 1..4, got {dims}")
    weights = {}
    for key in ("weight_v", "weight_w"):
        if key not in d:
            raise ConfigError(key, "missing")
        try:
            wt = weight_from_dict(d[key])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(key, str(exc)) from None
        if wt.dim != dims:
            raise ConfigError(key, f"weight has dimension {wt.dim}, dims is {dims}")
        weights[key] = wt
    g = d.get("grid", {})
    if not isinstance(g, dict):
        raise ConfigError("grid", "must be an object")
    spec = GridSpec(
        _num(g, "x_min", GridSpec.x_min),
        _num(g, "x_max", GridSpec.x_max),
        _num(g, "nodes_per_axis", 256 if dims <= 2 else 64, int),
        str(g.get("spacing", "log")),
    )
    if overrides is not None:
        if overrides.grid_nodes is not None:
            spec.nodes_per_axis = overrides.grid_nodes
        if overrides.x_min is not None:
            spec.x_min = overrides.x_min
        if overrides.x_max is not None:
            spec.x_max = overrides.x_max
    if spec.spacing not in ("log", "linear"):
        raise ConfigError("grid.spacing", f"must be 'log' or 'linear', got {spec.spacing!r}")
    if not spec.x_min < spec.x_max:
        raise ConfigError("grid.x_min", "x_min must be below x_max")
    if spec.x_min < 0 or (spec.spacing == "log" and spec.x_min <= 0):
        raise ConfigError("grid.x_min", "must be positive for log spacing and nonnegative otherwise")
    if spec.nodes_per_axis < 8:
        raise ConfigError("grid.nodes_per_axis", "at least 8 nodes per axis")
    cfg = RunConfig(weights["weight_v"], weights["weight_w"], p, q, dims, spec)
    cfg.iters = _num(d, "iters", 500, int)
    cfg.starts = _num(d, "starts", 4, int)
    cfg.tol = _num(d, "tol", 1e-9)
    cfg.seed = _num(d, "seed", 0, int)
    if overrides is not None and overrides.seed is not None:
        cfg.seed = overrides.seed
    if "deltas" in d:
        try:
            cfg.deltas = tuple(float(x) for x in d["deltas"])
        except (TypeError, ValueError):
            raise ConfigError("deltas", "must be a list of numbers") from None
    for key in ("s1", "s2"):
        if d.get(key) is not None:
            val = _num(d, key)
            if not 1 < val < p:
                raise ConfigError(key, f"must lie in (1, p={p}), got {val}")
            setattr(cfg, key, val)
    if "functionals" in d:
        names = d["functionals"]
        known = set(fn.A_NAMES + fn.B_NAMES + fn.BV_NAMES + fn.MULTI_NAMES)
        if not isinstance(names, list) or any(n not in known for n in names):
            raise ConfigError("functionals", f"expected a list drawn from {sorted(known)}")
        cfg.functionals = names
    cfg.p_range = d.get("p_range")
    cfg.q_range = d.get("q_range")
    return cfg


def parse_range(text: str, fld: str) -> list[float]:
    """``start:stop:step`` with an inclusive stop, evaluated in exact decimals."""
    parts = str(text).split(":")
    if len(parts) == 1:
        parts = [parts[0], parts[0], "1"]
    if len(parts) != 3:
        raise ConfigError(fld, f"expected start:stop:step, got {text!r}")
    try:
        a, b, s = (Fraction(x.strip()) for x in parts)
    except ValueError:
        raise ConfigError(fld, f"non-numeric range {text!r}") from None
    if s <= 0:
        raise ConfigError(fld, "step must be positive")
    out = []
    x = a
    while x <= b:
        out.append(float(x))
        x += s
    if not out:
        raise ConfigError(fld, f"range {text!r} is empty")
    return out


# ----------------------------------------------------------------- reports


def _finite(x: float | None) -> float | None:
    if x is None:
        return None
    return x if math.isfinite(x) else None


def compute_functionals(cfg: RunConfig, grid: GridN, e: Exponents, warnings: list[str]) -> dict[str, fn.FunctionalValue]:
    values: dict[str, fn.FunctionalValue] = {}
    requested = cfg.functionals
    fields = fn.Fields.from_weights(cfg.weight_v, cfg.weight_w, grid, e)
    two_weight = [n for n in fn.names_for_zone(e) if grid.dim == 2 or n in fn.A_NAMES]
    if requested is not None:
        for n in requested:
            if n in fn.B_NAMES + fn.BV_NAMES and e.zone != "q<p":
                warnings.append(f"{n} is defined for q < p only; omitted")
            elif n in fn.B_NAMES + fn.BV_NAMES and grid.dim != 2:
                warnings.append(f"{n} is two-dimensional; omitted")
        two_weight = [n for n in requested if n in two_weight] + [n for n in fn.A_NAMES if n not in requested]
    values.update(fn.evaluate(fields, two_weight))
    multi = [n for n in (requested or []) if n in fn.MULTI_NAMES]
    for n in multi:
        try:
            s = (cfg.s1, cfg.s2) if n == "AW" else None
            values[n] = fn.multidim_functional(n, cfg.weight_v, cfg.weight_w, grid, e, s)
        except (ZoneError, ValueError) as exc:
            warnings.append(f"{n} omitted: {exc}")
    for n, fv in values.items():
        frac = fv.info.get("negative_mass_fraction", 0.0)
        if frac > 0:
            warnings.append(f"{n}: signed Stieltjes measure, negative mass fraction {frac:.3g}")
    return values


def truncation_warnings(cfg: RunConfig, e: Exponents, values: dict[str, fn.FunctionalValue]) -> list[str]:
    wide = cfg.grid.widened().build(cfg.dims)
    other = compute_functionals(cfg, wide, e, [])
    out = []
    for n, fv in values.items():
        if n not in other:
            continue
        a, b = fv.value, other[n].value
        if a == b:
            continue
        rel = abs(b - a) / max(abs(a), abs(b))
        if rel > TRUNCATION_TOL:
            out.append(f"{n} changes by {100 * rel:.1f}% when x_max doubles (truncation sensitive)")
    return out


def theorem_bounds(e: Exponents, vals: dict[str, float]) -> tuple[float, float, dict[str, float]]:
    """Theorem lower bound and the smallest available upper bound."""
    cs = fn.constants(e)
    uppers: dict[str, float] = {}
    if e.zone == "p<q":
        a1, a2, a3 = vals["A1"], vals["A2"], vals["A3"]
        lower = a1
        uppers["C_alpha*A1"] = cs.C_upper * a1
        uppers["C11*(A1+A2+A3)"] = cs.C11 * (a1 + a2 + a3)
        uppers["C11*(1+alpha^(1/q)+alpha'^(1/p'))*A1"] = (
            cs.C11 * (1.0 + cs.alpha ** (1.0 / e.q) + cs.alpha_dual ** (1.0 / e.pp)) * a1
        )
    elif e.zone == "p=q":
        lower = vals["A1"]
        uppers["C11*(A1+A2+A3)"] = cs.C11 * (vals["A1"] + vals["A2"] + vals["A3"])
    else:
        b1 = vals["B1"]
        lower = cs.c_lower * b1
        uppers["C_beta*B1"] = cs.C_upper * b1
        if e.r_over_p_ge_1 and e.r_over_qp_ge_1:
            uppers["C11*(B1+B2+B3)"] = cs.C11 * (b1 + vals["B2"] + vals["B3"])
        elif e.r_over_p_ge_1:
            uppers["C1b*(B1+B2)"] = cs.C1b * (b1 + vals["B2"])
        elif e.r_over_qp_ge_1:
            uppers["Cb1*(B1+B3)"] = cs.Cb1 * (b1 + vals["B3"])
    return lower, min(uppers.values()), uppers


def build_report(cfg: RunConfig, with_norm: bool, check_truncation: bool = True) -> tuple[dict, bool]:
    e = cfg.exps
    grid = cfg.grid.build(cfg.dims)
    warnings: list[str] = []
    values = compute_functionals(cfg, grid, e, warnings)
    if check_truncation:
        warnings += truncation_warnings(cfg, e, values)
    raw = {n: fv.value for n, fv in values.items()}
    chains = fn.zone_chain(raw, e) if all(n in raw for n in ("B1", "B2", "B3")) or e.zone != "q<p" else []
    report: dict[str, Any] = {
        "exponents": {"p": e.p, "q": e.q, "pp": e.pp, "qp": e.qp, "r": e.r, "zone": e.zone},
        "zone_tag": e.zone_tag,
        "grid": cfg.grid.__dict__ | {"dims": cfg.dims},
        "functionals": {n: fv.to_dict() for n, fv in values.items()},
        "constants": fn.constants(e).to_dict(),
        "chains": [c.to_dict() for c in chains],
        "warnings": warnings,
    }
    ok = all(c.holds for c in chains)
    if with_norm:
        est = ascend(cfg.weight_v, cfg.weight_w, e, grid, iters=cfg.iters, tol=cfg.tol)
        if e.zone == "q<p" and "B1" not in raw:
            raw["B1"] = fn.b_functional("B1", fn.Fields.from_weights(cfg.weight_v, cfg.weight_w, grid, e)).value
        lower_thm, upper, uppers = theorem_bounds(e, raw)
        lo = max(est.probe_lower, lower_thm)
        report["norm"] = est.summary()
        report["interval"] = {
            "lower": lo,
            "upper": upper,
            "theorem_lower": lower_thm,
            "probe_lower": est.probe_lower,
            "upper_candidates": uppers,
        }
        report["estimate"] = est.value
        ok = ok and lo <= upper * (1.0 + fn.SLACK) and est.value <= upper * (1.0 + fn.SLACK)
        if not all(math.isfinite(x) for x in (lo, upper, est.value)):
            warnings.append("non-finite bound in the report")
    return report, ok


# ------------------------------------------------------------------ output


def _dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return "%.17g" % x


def sweep_row(cfg: RunConfig, p: float, q: float) -> list[str]:
    e = Exponents(p, q)
    grid = cfg.grid.build(cfg.dims)
    fields = fn.Fields.from_weights(cfg.weight_v, cfg.weight_w, grid, e)
    vals = {n: fv.value for n, fv in fn.evaluate(fields).items()}
    est = ascend(cfg.weight_v, cfg.weight_w, e, grid, iters=cfg.iters, tol=cfg.tol, threads=1)
    cs = fn.constants(e)
    lower_thm, upper, _ = theorem_bounds(e, vals)
    row = {
        "p": p,
        "q": q,
        "r": e.r if e.zone == "q<p" else None,
        "zone": e.zone_tag,
        "c_lower": cs.c_lower,
        "C_upper": cs.C_upper,
        "probe_lower": est.probe_lower,
        "ascent": est.value,
        "certified_lo": max(est.probe_lower, lower_thm),
        "certified_hi": upper,
        **vals,
    }
    return [_fmt(row.get(c)) for c in CSV_COLUMNS]


# ---------------------------------------------------------------- commands


def _load(args) -> RunConfig:
    if args.config is None:
        raise ConfigError("--config", "a config file is required")
    try:
        with open(args.config) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", f"malformed JSON: {exc}") from None
    return parse_config(data, args)


def cmd_functionals(args) -> int:
    cfg = _load(args)
    report, ok = build_report(cfg, with_norm=False)
    _write(_dump_json(report), args.out)
    return EXIT_OK if ok else EXIT_CHECK


def cmd_norm(args) -> int:
    cfg = _load(args)
    report, ok = build_report(cfg, with_norm=True)
    _write(_dump_json(report), args.out)
    return EXIT_OK if ok else EXIT_CHECK


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        raise ConfigError("suite", f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    seed = 0 if args.seed is None else args.seed
    reports = run_suite(args.suite, seed)
    ok = all(r.passed for r in reports)
    out = {
        "suite": args.suite,
        "seed": seed,
        "passed": ok,
        "instances_run": sum(r.instances_run for r in reports),
        "worst_margin": min(r.worst_margin for r in reports),
        "reports": [r.to_dict() for r in reports],
    }
    _write(_dump_json(out), args.out)
    return EXIT_OK if ok else EXIT_CHECK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    ps = parse_range(cfg.p_range if cfg.p_range is not None else repr(cfg.p), "p_range")
    qs = parse_range(cfg.q_range if cfg.q_range is not None else repr(cfg.q), "q_range")
    pairs = [(p, q) for p in ps for q in qs if p > 1 and q > 1]
    if not pairs:
        raise ConfigError("p_range", "no (p, q) pair with p, q > 1")
    nthreads = min(max_threads(), len(pairs))
    if nthreads > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as ex:
            rows = list(ex.map(lambda pq: sweep_row(cfg, *pq), pairs))
    else:
        rows = [sweep_row(cfg, p, q) for p, q in pairs]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(rows)
    _write(buf.getvalue(), args.out)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hardycert", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (JSON)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--seed", type=int)
    common.add_argument("--grid-nodes", type=int, dest="grid_nodes")
    common.add_argument("--x-min", type=float, dest="x_min")
    common.add_argument("--x-max", type=float, dest="x_max")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("functionals", parents=[common], help="functionals, constants and chains").set_defaults(
        func=cmd_functionals
    )
    sub.add_parser("norm", parents=[common], help="add the ascent estimate and certified interval").set_defaults(
        func=cmd_norm
    )
    pv = sub.add_parser("verify", parents=[common], help="run a verification suite")
    pv.add_argument("suite", help="|".join(SUITES))
    pv.set_defaults(func=cmd_verify)
    sub.add_parser("sweep", parents=[common], help="CSV over p/q ranges").set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"hardycert: {exc}\n")
        return EXIT_CONFIG
    except (ZoneError, ValueError) as exc:
        sys.stderr.write(f"hardycert: invalid configuration: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
