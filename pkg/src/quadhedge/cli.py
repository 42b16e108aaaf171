"""Command-line interface.

Subcommands cover the full pipeline: calibrate a jump density from returns,
discretize a model, price/hedge a single option, and emit the standard
reports (valuation grid, rebalancing scaling study, kurtosis table, premium
matrix, Monte Carlo check).  Durations accept unit suffixes; intervals read
"m" as minutes while maturities read "m" as months (21 trading days), both
on the 8-hour/250-day calendar.  Bare numbers are years.

Failures raised by the library exit with status 2 and a one-line JSON
object on stderr: {"error": <code>, "message": ..., "context": {...}}.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .bsref import BsParams, delta_to_level
from .calibration import (CumulantFunction, MarketParams, annualized_moments,
                          build_raw_levy, gaussian_model, jump_diffusion_model,
                          load_model, load_returns, rescale, save_model)
from .distribution import (InversionConfig, discretize, lattice_moments,
                           save_distribution)
from .engine import UpAndOutCall, backward_induct, error_accumulate, hedge_report
from .errors import ConfigError, QuadHedgeError
from .mc import SimConfig, simulate_hedge
from .pricing import premium_ratio, sharpe_price
from .reports import (DEFAULT_INTERVALS, build_grid, grid_to_csv, grid_to_markdown,
                      kurtosis_table, kurtosis_to_markdown, premium_grid,
                      premium_to_markdown, run_manifest, scaling_study,
                      scaling_to_csv, scaling_to_markdown)

MINUTES_PER_YEAR = 250.0 * 8.0 * 60.0
HOURS_PER_YEAR = 250.0 * 8.0
DAYS_PER_YEAR = 250.0
DAYS_PER_MONTH = 21.0


def parse_interval(text: str) -> float:
    """Rebalancing/monitoring interval in years; 'm' means minutes."""
    t = text.strip().lower()
    try:
        if t.endswith("min"):
            return float(t[:-3]) / MINUTES_PER_YEAR
        if t.endswith("m"):
            return float(t[:-1]) / MINUTES_PER_YEAR
        if t.endswith("h"):
            return float(t[:-1]) / HOURS_PER_YEAR
        if t.endswith("d"):
            return float(t[:-1]) / DAYS_PER_YEAR
        if t.endswith("y"):
            return float(t[:-1])
        return float(t)
    except ValueError:
        raise ConfigError("cannot parse interval", text=text)


def parse_maturity(text: str) -> float:
    """Option maturity in years; 'm' means months of 21 trading days."""
    t = text.strip().lower()
    try:
        if t.endswith("d"):
            return float(t[:-1]) / DAYS_PER_YEAR
        if t.endswith("m"):
            return float(t[:-1]) * DAYS_PER_MONTH / DAYS_PER_YEAR
        if t.endswith("y"):
            return float(t[:-1])
        return float(t)
    except ValueError:
        raise ConfigError("cannot parse maturity", text=text)


def _config(args) -> InversionConfig:
    kw = {}
    if getattr(args, "eta", None) is not None:
        kw["eta"] = args.eta
    if getattr(args, "alpha", None) is not None:
        kw["alpha"] = args.alpha
    return InversionConfig(**kw)


def _model_from_args(args):
    name = getattr(args, "model", None)
    if name == "gaussian":
        return gaussian_model(args.mu - 0.5 * args.sigma ** 2, args.sigma)
    if name == "jump":
        return jump_diffusion_model(args.mu - 0.5 * args.sigma ** 2, args.sigma)
    if name:
        if not os.path.exists(name):
            raise ConfigError("model file not found (builtin names: gaussian, jump)",
                              path=name)
        return load_model(name)
    if getattr(args, "jump", False):
        return jump_diffusion_model(args.mu - 0.5 * args.sigma ** 2, args.sigma)
    return gaussian_model(args.mu - 0.5 * args.sigma ** 2, args.sigma)


def _write(text: str, path: str | None):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj):
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def cmd_calibrate(args):
    sample = load_returns(args.input, parse_interval(args.interval))
    raw = build_raw_levy(sample, n_interior=args.bins)
    if args.sigma is not None:
        raw = rescale(raw, args.sigma)
    drift = args.drift if args.drift is not None \
        else float(np.mean(sample.values)) / sample.sample_interval
    model = CumulantFunction(drift, 0.0, raw, label=args.label)
    save_model(model, args.output)
    mean, var, _, _ = annualized_moments(model, 1.0)
    daily = model.cumulants(1.0 / DAYS_PER_YEAR)
    _emit_json({"output": args.output, "observations": int(sample.values.size),
                "annual_mean_log_return": mean, "annual_variance": var,
                "skewness_1d": daily.skewness, "kurtosis_1d": daily.kurtosis})


def cmd_dist(args):
    model = _model_from_args(args)
    delta = parse_interval(args.interval)
    dist = discretize(model, delta, _config(args))
    if args.output:
        save_distribution(dist, args.output)
    moments = lattice_moments(dist)
    _emit_json({"eta": dist.eta, "n_down": dist.n_down, "n_up": dist.n_up,
                "bins": int(dist.probs.size), "delta": delta,
                "mean": moments.log.mean, "variance": moments.log.variance,
                "skewness": moments.log.skewness, "kurtosis": moments.log.kurtosis,
                "output": args.output})


def _single_report(args):
    delta = parse_interval(args.interval)
    market = MarketParams(mu=args.mu, sigma=args.sigma, r=args.rate, delta=delta)
    model = _model_from_args(args)
    dist = discretize(model, delta, _config(args))
    maturity = parse_maturity(args.maturity)
    strike = args.strike
    barrier = args.barrier
    if args.strike_delta is not None or args.barrier_delta is not None:
        bs = BsParams(s0=args.s0, sigma=args.sigma, r=args.rate,
                      mu=args.mu, t=maturity)
        if args.strike_delta is not None:
            strike = delta_to_level(bs, args.strike_delta)
        if args.barrier_delta is not None:
            barrier = delta_to_level(bs, args.barrier_delta)
    if strike is None:
        raise ConfigError("need --strike or --strike-delta")
    monitoring = parse_interval(args.monitoring) if args.monitoring else None
    option = UpAndOutCall(strike, maturity, barrier, monitoring)
    return option, dist, market, model


def cmd_hedge(args):
    option, dist, market, model = _single_report(args)
    rep = hedge_report(option, dist, market, args.s0)
    _emit_json({"strike": option.strike, "barrier": option.barrier,
                "maturity": option.maturity, "model": model.label,
                "value": rep.v0, "initial_hedge": rep.xi0,
                "eps_optimal": rep.eps_optimal, "eps_local": rep.eps_local,
                "dead_mass": rep.dead_mass, "steps": rep.n_steps,
                "premium_ratio": premium_ratio(rep.v0, rep.eps_optimal, option.maturity)})


def cmd_mc_check(args):
    option, dist, market, model = _single_report(args)
    if option.barrier is not None:
        q = round(math.log(option.barrier / args.s0) / dist.eta - 0.5)
    else:
        q = None
    run = backward_induct(option, dist, market, args.s0, barrier_offset=q)
    rep = error_accumulate(run, keep_surfaces=True)
    res = simulate_hedge(run, rep, SimConfig(paths=args.paths, seed=args.seed,
                                             strategy=args.strategy))
    _emit_json({"model": model.label, "snapped_barrier": run.snapped_barrier,
                "value": rep.v0, "eps": rep.eps_optimal,
                "mc_mean": res.mean, "mc_std": res.std,
                "se_mean": res.se_mean, "se_std": res.se_std,
                "z_mean": res.mean / res.se_mean if res.se_mean else 0.0,
                "z_std": (res.std - (rep.eps_optimal if args.strategy == "optimal"
                                     else rep.eps_local)) / res.se_std if res.se_std else 0.0,
                "dead_fraction": res.dead_fraction, "paths": res.paths,
                "seed": args.seed, "strategy": args.strategy})


_GRID_PRESETS = {
    "grid-1m-gauss": {"maturity": "1m", "mu": 0.1, "jump": False},
    "grid-6m-gauss": {"maturity": "6m", "mu": 0.1, "jump": False},
    "grid-6m-gauss-downdrift": {"maturity": "6m", "mu": -0.1, "jump": False},
    "grid-1m-jump": {"maturity": "1m", "mu": 0.1, "jump": True},
    "premium-1m": {"maturity": "1m", "mu": 0.1, "jump": True, "premium": True},
}


def cmd_table(args):
    preset = _GRID_PRESETS.get(args.preset) if args.preset else None
    if args.preset and preset is None:
        raise ConfigError("unknown preset", preset=args.preset,
                          known=sorted(_GRID_PRESETS))
    maturity = parse_maturity(args.maturity if args.maturity
                              else (preset or {}).get("maturity", "1m"))
    mu = args.mu if args.mu is not None else (preset or {}).get("mu", 0.1)
    use_jump = args.jump or bool((preset or {}).get("jump"))
    want_premium = bool((preset or {}).get("premium")) or args.premium

    delta = parse_interval(args.interval)
    market = MarketParams(mu=mu, sigma=args.sigma, r=args.rate, delta=delta)
    model = jump_diffusion_model(mu - 0.5 * args.sigma ** 2, args.sigma) \
        if use_jump else None
    cfg = _config(args)
    include = None
    if args.cells:
        include = set()
        for part in args.cells.split(","):
            dk, _, db = part.partition(":")
            include.add((float(dk), float(db)))
    grid = build_grid(market, maturity, s0=args.s0, cfg=cfg, model=model,
                      include=include, compute_errors=not args.values_only)
    if args.manifest:
        _write(run_manifest("grid", cfg, market=market, grid=grid), args.manifest)
    if want_premium:
        rows = premium_grid(grid, loading_maturity=parse_maturity(args.loading_maturity)
                            if args.loading_maturity else None)
        _write(premium_to_markdown(grid, rows), args.output)
        return
    text = grid_to_csv(grid) if args.format == "csv" else grid_to_markdown(grid)
    _write(text, args.output)


def cmd_scaling(args):
    cfg = _config(args)
    intervals = DEFAULT_INTERVALS
    if args.intervals:
        intervals = tuple((part.strip(), parse_interval(part))
                          for part in args.intervals.split(","))
    barriers = tuple(float(b) for b in args.barriers.split(",")) if args.barriers \
        else (114.6, 107.9)
    rows = scaling_study(mu=args.mu, sigma=args.sigma, r=args.rate,
                         maturity=parse_maturity(args.maturity), s0=args.s0,
                         strike=args.strike, barriers=barriers,
                         monitoring_interval=parse_interval(args.monitoring),
                         intervals=intervals, cfg=cfg)
    if args.manifest:
        _write(run_manifest("scaling", cfg, mu=args.mu, sigma=args.sigma,
                            rate=args.rate, strike=args.strike,
                            barriers=list(barriers),
                            rows=[{"label": r.label, "interval": r.interval,
                                   "eps": r.eps, "ratio": r.ratio} for r in rows]),
               args.manifest)
    text = scaling_to_csv(rows) if args.format == "csv" else scaling_to_markdown(rows)
    _write(text, args.output)


def cmd_kurtosis(args):
    cfg = _config(args)
    if args.model:
        model = _model_from_args(args)
    else:
        model = jump_diffusion_model(args.mu - 0.5 * args.sigma ** 2, args.sigma)
    rows = kurtosis_table(model, cfg=cfg)
    _write(kurtosis_to_markdown(rows), args.output)


def cmd_sharpe(args):
    quote = sharpe_price(args.value, args.eps, args.sharpe,
                         parse_maturity(args.maturity), args.rate)
    _emit_json({"value": quote.value, "eps": quote.eps, "sharpe": quote.sharpe,
                "maturity": quote.maturity, "rate": quote.rate,
                "price": quote.price, "loading": quote.loading,
                "premium_ratio": premium_ratio(quote.value, quote.eps, quote.maturity)})


def _add_market_args(p, need_interval=True):
    p.add_argument("--mu", type=float, default=0.1, help="annual price drift")
    p.add_argument("--sigma", type=float, default=0.2, help="annual volatility")
    p.add_argument("--rate", type=float, default=0.0, help="annual riskless rate")
    p.add_argument("--s0", type=float, default=100.0, help="initial price")
    if need_interval:
        p.add_argument("--interval", default="1d", help="rebalancing interval (e.g. 5m, 1h, 1d)")
    p.add_argument("--eta", type=float, default=None, help="lattice spacing override")
    p.add_argument("--alpha", type=float, default=None, help="tail mass override")


def _add_option_args(p):
    p.add_argument("--maturity", default="1m", help="option maturity (e.g. 21d, 1m, 0.5y)")
    p.add_argument("--strike", type=float, default=None)
    p.add_argument("--barrier", type=float, default=None)
    p.add_argument("--strike-delta", type=float, default=None)
    p.add_argument("--barrier-delta", type=float, default=None)
    p.add_argument("--monitoring", default="1d", help="barrier monitoring interval")
    p.add_argument("--model", default=None,
                   help="model JSON from calibrate, or 'gaussian'/'jump'")
    p.add_argument("--jump", action="store_true", help="use the bundled jump-diffusion model")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="quadhedge",
        description="Variance-optimal discrete hedging: calibration, lattice "
                    "valuation, risk accumulation, and reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="estimate a jump density from log returns")
    p.add_argument("--input", required=True, help="returns file (1 or 2 columns)")
    p.add_argument("--interval", required=True, help="sample spacing (e.g. 5m, 1d)")
    p.add_argument("--bins", type=int, default=1000)
    p.add_argument("--sigma", type=float, default=None, help="rescale to this annual vol")
    p.add_argument("--drift", type=float, default=None, help="annual mean log return")
    p.add_argument("--label", default="calibrated")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("dist", help="discretize a model onto the lattice")
    _add_market_args(p)
    p.add_argument("--model", default=None)
    p.add_argument("--jump", action="store_true")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("hedge", help="value and risk for one option")
    _add_market_args(p)
    _add_option_args(p)
    p.set_defaults(func=cmd_hedge)

    p = sub.add_parser("mc-check", help="Monte Carlo check of one option's risk")
    _add_market_args(p)
    _add_option_args(p)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=20260822)
    p.add_argument("--strategy", choices=("optimal", "local"), default="optimal")
    p.set_defaults(func=cmd_mc_check)

    p = sub.add_parser("table", help="delta-addressed valuation/risk grid")
    _add_market_args(p)
    p.add_argument("--preset", default=None,
                   help="|".join(sorted(_GRID_PRESETS)))
    p.add_argument("--maturity", default=None)
    p.add_argument("--jump", action="store_true")
    p.add_argument("--premium", action="store_true",
                   help="emit the premium-ratio matrix instead of the grid")
    p.add_argument("--loading-maturity", default=None,
                   help="maturity used in the loading (defaults to grid maturity)")
    p.add_argument("--cells", default=None,
                   help="subset, e.g. 0.49:0.10,0.75:1e-100")
    p.add_argument("--values-only", action="store_true",
                   help="skip the risk columns (much faster)")
    p.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    p.add_argument("--output", default=None)
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("scaling", help="risk vs rebalancing interval")
    _add_market_args(p, need_interval=False)
    p.add_argument("--maturity", default="1m")
    p.add_argument("--strike", type=float, default=103.3)
    p.add_argument("--barriers", default=None, help="comma list, default 114.6,107.9")
    p.add_argument("--monitoring", default="1d")
    p.add_argument("--intervals", default=None, help="comma list of intervals")
    p.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    p.add_argument("--output", default=None)
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("kurtosis", help="kurtosis vs period length for a model")
    _add_market_args(p, need_interval=False)
    p.add_argument("--model", default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_kurtosis)

    p = sub.add_parser("sharpe", help="risk-loaded quote from (value, risk)")
    p.add_argument("--value", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--sharpe", type=float, required=True)
    p.add_argument("--maturity", default="1m")
    p.add_argument("--rate", type=float, default=0.0)
    p.set_defaults(func=cmd_sharpe)

    args = parser.parse_args(argv)
    try:
        args.func(args)
        return 0
    except QuadHedgeError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return 2
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "io-error", "message": str(exc),
                                     "context": {}}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
