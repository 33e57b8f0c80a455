"""Command-line entry point.

Subcommands: generate-data, backtest, solve, run, compare, indicators.
Global flags ``--seed``, ``--threads`` and ``--out`` come before the
subcommand, e.g. ``parden --threads 4 run experiment.json``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import BacktestConfig, evaluate
from .errors import ConfigError, PardenError
from .experiment import (
    QUALITY_COLUMNS,
    ExperimentConfig,
    compare,
    load_method_runs,
    read_front,
    resolve_reference,
    run_experiment,
    write_comparison,
    write_table,
)
from .indicators import gd_plus, hv_reference_point, hypervolume_2d, igd_plus
from .market import SyntheticMarketSpec, generate_synthetic, load_csv, save_csv
from .moo import non_dominated_mask
from .solver import PortfolioProblem, TradeoffVector, solve_basic, solve_extended

log = logging.getLogger("parden")


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _range(text: str) -> tuple[float, float]:
    lo, hi = (float(v) for v in text.split(","))
    return lo, hi


def cmd_generate_data(args) -> int:
    if not args.out:
        raise ConfigError("generate-data needs --out <file.csv>", "out")
    seed = 7 if args.seed is None else args.seed
    kw = {}
    if args.drift:
        kw["drift_range"] = _range(args.drift)
    if args.vol:
        kw["vol_range"] = _range(args.vol)
    spec = SyntheticMarketSpec.from_factor_model(args.assets, args.days, seed, **kw)
    save_csv(generate_synthetic(spec), args.out)
    log.info("wrote %d days x %d assets to %s", args.days, args.assets, args.out)
    return 0


def cmd_backtest(args) -> int:
    data = load_csv(args.data)
    settings = json.loads(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    if args.in_sample:
        settings["in_sample"] = True
    try:
        config = BacktestConfig(**settings)
    except TypeError as exc:
        raise ConfigError(str(exc), "config") from exc
    tr = TradeoffVector(args.gamma, args.gamma_trade, args.gamma_hold, args.lmax)
    result = evaluate(tr, data, config)
    _emit({"tradeoffs": dict(zip(("gamma_risk", "gamma_trade", "gamma_hold", "leverage_max"), tr.as_tuple())),
           **result.to_dict()}, args.out)
    return 1 if result.failed else 0


def cmd_solve(args) -> int:
    """Solve one program described by a JSON file with ``mu`` and ``sigma``.

    Optional keys: ``w0``, ``gamma_risk``, ``gamma_trade``, ``gamma_hold``,
    ``leverage_max``, ``trade_cost``, ``hold_cost``. ``--basic`` uses the
    closed form (budget constraint only).
    """
    spec = json.loads(Path(args.problem).read_text(encoding="utf-8"))
    mu = np.asarray(spec["mu"], dtype=float)
    sigma = np.asarray(spec["sigma"], dtype=float)
    gamma = float(spec.get("gamma_risk", 1.0))
    if args.basic:
        sol = solve_basic(mu, sigma, gamma)
    else:
        n = mu.shape[0]
        problem = PortfolioProblem(
            mu, sigma, np.asarray(spec.get("w0", np.full(n, 1.0 / n)), dtype=float),
            TradeoffVector(gamma, float(spec.get("gamma_trade", 0.0)), float(spec.get("gamma_hold", 0.0)),
                           float(spec.get("leverage_max", 1.0))),
            spec.get("trade_cost", 0.0), spec.get("hold_cost", 0.0),
        )
        sol = solve_extended(problem)
    _emit({"w": sol.w.tolist(), "objective": sol.objective_value, "iterations": sol.iterations,
           "converged": sol.converged}, args.out)
    return 0 if sol.converged else 1


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.base_seed = args.seed
    if args.threads is not None:
        cfg.workers = args.threads
    try:
        method_dir = run_experiment(cfg, args.out)
    except RuntimeError as exc:
        log.error("%s", exc)
        return 1
    log.info("results in %s", method_dir)
    return 0


def cmd_compare(args) -> int:
    methods = load_method_runs(args.results)
    if not args.reference:
        raise ConfigError("compare needs --reference <front.csv | random:<n>[:<seed>]>", "reference")
    reference = resolve_reference(args.reference, args.results, methods)
    comp = compare(methods, reference)
    write_comparison(comp, args.out or args.results)
    for row in comp.quality:
        log.info("%s", row)
    return 0


def cmd_indicators(args) -> int:
    """Indicators of run logs (a results directory) or of a single front CSV."""
    reference = read_front(args.reference)
    reference = reference[non_dominated_mask(reference)]
    if Path(args.runs).is_dir():
        comp = compare(load_method_runs(args.runs), reference)
        out = Path(args.out or args.runs)
        write_table(out / "metrics.csv", comp.performance, ["method", "gd_plus", "igd_plus", "hv"])
        write_table(out / "quality.csv", comp.quality, QUALITY_COLUMNS)
        return 0
    front = read_front(args.runs)
    point = hv_reference_point([front, reference]) if args.hv_ref is None else np.array(
        [args.hv_ref[0], -args.hv_ref[1]])
    _emit({
        "gd_plus": gd_plus(front, reference),
        "igd_plus": igd_plus(front, reference),
        "hv": hypervolume_2d(front, point),
        "reference_hv": hypervolume_2d(reference, point),
        "hv_reference_point": {"risk_pct": float(point[0]), "return_pct": float(-point[1])},
    }, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parden", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--seed", type=int, default=None, help="seed (data seed, or base seed of a run)")
    p.add_argument("--threads", type=int, default=None, help="worker threads for backtests")
    p.add_argument("--out", default=None, help="output file or directory")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-data", help="write a synthetic market CSV")
    g.add_argument("--assets", type=int, default=5)
    g.add_argument("--days", type=int, default=1260)
    g.add_argument("--drift", help="annual drift range 'lo,hi'")
    g.add_argument("--vol", help="annual volatility range 'lo,hi'")
    g.set_defaults(func=cmd_generate_data)

    b = sub.add_parser("backtest", help="simulate one trade-off vector")
    b.add_argument("--data", required=True, help="market CSV")
    b.add_argument("--gamma", type=float, required=True, help="risk aversion")
    b.add_argument("--gamma-trade", type=float, default=0.0)
    b.add_argument("--gamma-hold", type=float, default=0.0)
    b.add_argument("--lmax", type=float, default=1.0, help="leverage cap")
    b.add_argument("--config", help="JSON object of backtest settings")
    b.add_argument("--in-sample", action="store_true")
    b.set_defaults(func=cmd_backtest)

    s = sub.add_parser("solve", help="solve one portfolio program from a JSON file")
    s.add_argument("problem")
    s.add_argument("--basic", action="store_true", help="closed-form budget-only solution")
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="tabulate indicators over completed runs")
    c.add_argument("results", help="results directory holding runs/")
    c.add_argument("--reference", help="front CSV or random:<n>[:<seed>]")
    c.set_defaults(func=cmd_compare)

    i = sub.add_parser("indicators", help="GD+, IGD+ and HV against a reference front")
    i.add_argument("runs", help="results directory, or a single front CSV")
    i.add_argument("reference", help="reference front CSV")
    i.add_argument("--hv-ref", type=float, nargs=2, metavar=("RISK_PCT", "RETURN_PCT"))
    i.set_defaults(func=cmd_indicators)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2) if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (PardenError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
