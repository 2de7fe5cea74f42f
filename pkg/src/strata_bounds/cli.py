"""Command-line surface: estimation runs, Monte Carlo experiments, and
smoothing-sensitivity curves.

All randomness flows from ``--seed`` (default 0, never wall-clock). Exit
codes: 0 success, 2 invalid input or configuration, 3 estimation failure.
Errors are emitted as a JSON object on stderr; primary results go to
stdout as JSON or CSV only, so runs can be piped. ``STRATA_BOUNDS_LOG``
sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .data_model import ObservationTable, Stratum, validate
from .errors import StrataBoundsError
from .estimation import (EstimationConfig, estimate_inefficient,
                         estimate_sharp, estimate_smooth, estimate_switch,
                         estimate_trim, heterogeneous_bounds, moment_rows)
from .identification import SupportBounds
from .nuisance import CellSpec, LearnerSpec, crossfit, load_external_nuisances
from .simulation import (DgpConfig, PANEL_SHARES, dgp_sample,
                         oracle_nuisances, run_experiment,
                         write_metrics_csv, write_power_csv)
from .smoothing import GFamily

EXIT_OK, EXIT_INPUT, EXIT_ESTIMATION = 0, 2, 3


def _fail(code: int, kind: str, message: str) -> int:
    json.dump({"error": kind, "message": message}, sys.stderr)
    sys.stderr.write("\n")
    return code


def _setup_logging():
    level = os.environ.get("STRATA_BOUNDS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _float_list(text: str):
    return [float(v) for v in text.split(",") if v.strip() != ""]


def _load_config_file(path):
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(str(exc))


class ConfigError(ValueError):
    pass


def _resolve(args, file_cfg: dict, defaults: dict) -> dict:
    """CLI flags override config-file values override defaults."""
    resolved = dict(defaults)
    resolved.update({k: v for k, v in file_cfg.items() if k in defaults})
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            resolved[key] = val
    return resolved


def _echo_resolved(resolved: dict):
    sys.stderr.write(json.dumps({"resolved_config": resolved}, sort_keys=True,
                                default=str) + "\n")


# ---------------------------------------------------------------------------
# estimate

def _build_bundle(table, args, seed):
    if args.nuisance_file:
        return load_external_nuisances(
            args.nuisance_file, table,
            provenance="external_oracle" if args.nuisance_oracle else "external")
    cells = CellSpec(discrete_cols=tuple(int(c) - 1 for c in
                                         (args.cells_discrete or "").split(",")
                                         if c.strip() != ""),
                     n_bins=args.cells_bins)
    spec = LearnerSpec(kind="builtin", cells=cells, folds=args.folds, seed=seed)
    return crossfit(table, spec)


def cmd_estimate(args) -> int:
    try:
        file_cfg = _load_config_file(args.config)
    except ConfigError as exc:
        return _fail(EXIT_INPUT, "InvalidConfig", str(exc))
    defaults = {"method": "sharp", "stratum": "at", "side": "both",
                "h": [0.05], "rho": "auto", "folds": 5, "alpha": 0.05,
                "seed": 0, "eps_trim": None, "dominance": False}
    resolved = _resolve(args, file_cfg, defaults)
    _echo_resolved(resolved)
    try:
        table = ObservationTable.from_csv(args.data, weights_col=args.weights_col)
    except (OSError, ValueError) as exc:
        return _fail(EXIT_INPUT, "InvalidData", str(exc))
    report = validate(table)
    if not report.ok:
        return _fail(EXIT_INPUT, "ValidationFailed", "; ".join(report.messages))

    try:
        bundle = _build_bundle(table, args, int(resolved["seed"]))
        support = SupportBounds.from_table(table)
        cfg = EstimationConfig(stratum=Stratum.parse(resolved["stratum"]),
                               alpha=float(resolved["alpha"]),
                               dominance=bool(resolved["dominance"]))
        results = []
        for method in str(resolved["method"]).split(","):
            method = method.strip()
            if method == "sharp":
                results.append(estimate_sharp(table, bundle, cfg, support))
            elif method == "trim":
                results.append(estimate_trim(table, bundle, cfg,
                                             eps_trim=resolved["eps_trim"],
                                             variant=args.trim_variant,
                                             support=support))
            elif method == "switch":
                rho = resolved["rho"]
                results.append(estimate_switch(table, bundle, cfg, rho=rho,
                                               support=support))
            elif method == "smooth":
                for h in resolved["h"]:
                    results.append(estimate_smooth(table, bundle,
                                                   GFamily(h=float(h)), cfg))
            elif method == "inefficient":
                results.append(estimate_inefficient(table, bundle, cfg, support))
            else:
                return _fail(EXIT_INPUT, "UnknownMethod", method)
        if args.group_col:
            results = _grouped(args, table, bundle, cfg, support, results)
    except StrataBoundsError as exc:
        return _fail(EXIT_ESTIMATION, type(exc).__name__, str(exc))

    payload = [r.to_dict() if hasattr(r, "to_dict") else r for r in results]
    side = str(resolved["side"]).lower()
    if side in ("l", "u"):
        drop = ("estimate_upper", "se_upper") if side == "l" \
            else ("estimate_lower", "se_lower")
        for rec in payload:
            for key in drop:
                rec[key] = None
    payload = _jsonable(payload)
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    _human_table(payload)
    return EXIT_OK


def _jsonable(obj):
    """Strict-JSON-safe copy: non-finite floats become null."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonable(float(obj))
    return obj


def _grouped(args, table, bundle, cfg, support, results):
    col = args.group_col
    if not (col.startswith("x") and col[1:].isdigit()):
        raise StrataBoundsError(f"group column must be one of x1..x{table.p}")
    groups = table.x[:, int(col[1:]) - 1]
    lo = moment_rows(table, bundle, "l", cfg, support)
    hi = moment_rows(table, bundle, "u", cfg, support)
    by_group = heterogeneous_bounds(lo, hi, groups, table.weight,
                                    alpha=cfg.alpha, stratum=cfg.stratum.value)
    grouped = [dict(est.to_dict(), group=float(g)) for g, est in by_group.items()]
    return [r for r in results] + grouped


def _human_table(payload):
    cols = ("method", "estimate_lower", "estimate_upper", "se_lower",
            "se_upper", "h")
    lines = ["  ".join(f"{c:>15}" for c in cols)]
    for rec in payload:
        cells = []
        for c in cols:
            v = rec.get(c)
            cells.append(f"{v:>15.6g}" if isinstance(v, float) else f"{str(v):>15}")
        lines.append("  ".join(cells))
    sys.stderr.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    try:
        file_cfg = _load_config_file(args.config)
    except ConfigError as exc:
        return _fail(EXIT_INPUT, "InvalidConfig", str(exc))
    defaults = {"panel": "a", "n": [400, 2000], "reps": 2000, "seed": 0,
                "gamma": 1.0, "alpha": 0.05, "h": [0.05, 0.01, 1e-9],
                "threads": 1, "out": "metrics.csv", "power_out": "power.csv",
                "shares": None, "power_points": 21}
    resolved = _resolve(args, file_cfg, defaults)
    _echo_resolved(resolved)
    panel = str(resolved["panel"]).lower()
    if resolved["shares"] is not None:
        shares = tuple(float(v) for v in resolved["shares"])
        label = panel if args.panel or "panel" in file_cfg else "custom"
    elif panel in PANEL_SHARES:
        shares, label = PANEL_SHARES[panel], panel
    else:
        return _fail(EXIT_INPUT, "UnknownPanel", panel)
    try:
        results = []
        for n in resolved["n"]:
            config = DgpConfig(n=int(n), shares=shares,
                               gamma=float(resolved["gamma"]),
                               base_seed=int(resolved["seed"]),
                               replications=int(resolved["reps"]),
                               alpha=float(resolved["alpha"]),
                               h_grid=tuple(resolved["h"]),
                               power_points=int(resolved["power_points"]),
                               label=label)
            results.append(run_experiment(config, threads=int(resolved["threads"])))
    except (StrataBoundsError, ValueError) as exc:
        return _fail(EXIT_INPUT, type(exc).__name__, str(exc))
    write_metrics_csv(results, resolved["out"])
    write_power_csv(results, resolved["power_out"])
    sys.stdout.write(f"wrote {resolved['out']} and {resolved['power_out']}\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bounds-curve

def cmd_bounds_curve(args) -> int:
    hs = args.h
    if not hs:
        return _fail(EXIT_INPUT, "EmptyGrid", "provide at least one h")
    try:
        if args.data:
            table = ObservationTable.from_csv(args.data,
                                              weights_col=args.weights_col)
            report = validate(table)
            if not report.ok:
                return _fail(EXIT_INPUT, "ValidationFailed",
                             "; ".join(report.messages))
            bundle = _build_bundle(table, args, args.seed or 0)
        else:
            config = DgpConfig(n=args.dgp_n, shares=PANEL_SHARES[args.panel],
                               base_seed=args.seed or 0, replications=1)
            table = dgp_sample(config, 0)
            bundle = oracle_nuisances(config)(table)
    except (OSError, ValueError, StrataBoundsError) as exc:
        return _fail(EXIT_INPUT, type(exc).__name__, str(exc))

    cfg = EstimationConfig(alpha=args.alpha)
    rows = ["h,lower,upper,ci_effect_lo,ci_effect_hi,error"]
    for h in hs:
        try:
            est = estimate_smooth(table, bundle, GFamily(h=float(h)), cfg)
            rows.append(",".join([repr(float(h)), repr(est.lower), repr(est.upper),
                                  repr(est.ci_effect[0]), repr(est.ci_effect[1]),
                                  ""]))
        except StrataBoundsError as exc:
            rows.append(f"{h!r},,,,,{type(exc).__name__}")
    sys.stdout.write("\n".join(rows) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="strata-bounds",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="bound estimates from a CSV sample")
    est.add_argument("data", help="input CSV (y,s,d,weight,x1..xp)")
    est.add_argument("--config", help="JSON config file")
    est.add_argument("--method",
                     help="comma list of sharp|trim|switch|smooth|inefficient")
    est.add_argument("--stratum", choices=["at", "c", "def", "nt", "em"])
    est.add_argument("--side", choices=["l", "u", "both"])
    est.add_argument("--h", type=_float_list, help="comma list of h values")
    est.add_argument("--rho", help="'auto' or a numeric switch threshold")
    est.add_argument("--eps-trim", dest="eps_trim", type=float)
    est.add_argument("--trim-variant", choices=["drop", "retain"], default="drop")
    est.add_argument("--folds", type=int)
    est.add_argument("--alpha", type=float)
    est.add_argument("--seed", type=int)
    est.add_argument("--weights-col", default="weight")
    est.add_argument("--nuisance-file", help="external per-row nuisance CSV")
    est.add_argument("--nuisance-oracle", action="store_true",
                     help="treat the external nuisances as exact")
    est.add_argument("--dominance", action="store_true", default=None)
    est.add_argument("--group-col", help="covariate column for subgroup bounds")
    est.add_argument("--cells-discrete",
                     help="comma list of covariate indices treated as discrete")
    est.add_argument("--cells-bins", type=int, default=1)
    est.set_defaults(func=cmd_estimate)

    sim = sub.add_parser("simulate", help="Monte Carlo benchmark tables")
    sim.add_argument("--config", help="JSON config file")
    sim.add_argument("--panel", choices=list(PANEL_SHARES))
    sim.add_argument("--n", type=lambda s: [int(v) for v in s.split(",")])
    sim.add_argument("--reps", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--gamma", type=float)
    sim.add_argument("--alpha", type=float)
    sim.add_argument("--h", type=_float_list)
    sim.add_argument("--threads", type=int)
    sim.add_argument("--out")
    sim.add_argument("--power-out", dest="power_out")
    sim.set_defaults(func=cmd_simulate)

    curve = sub.add_parser("bounds-curve",
                           help="smoothed bounds across an h grid")
    curve.add_argument("--data", help="input CSV; omit to use the benchmark DGP")
    curve.add_argument("--panel", choices=list(PANEL_SHARES), default="a")
    curve.add_argument("--dgp-n", type=int, default=2000)
    curve.add_argument("--h", type=_float_list, required=True)
    curve.add_argument("--alpha", type=float, default=0.05)
    curve.add_argument("--seed", type=int)
    curve.add_argument("--folds", type=int, default=5)
    curve.add_argument("--weights-col", default="weight")
    curve.add_argument("--nuisance-file")
    curve.add_argument("--nuisance-oracle", action="store_true")
    curve.add_argument("--cells-discrete")
    curve.add_argument("--cells-bins", type=int, default=1)
    curve.set_defaults(func=cmd_bounds_curve)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
