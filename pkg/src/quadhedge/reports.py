"""Report builders: valuation/risk grids over delta-parametrized cells,
the rebalancing-interval scaling study, kurtosis diagnostics, and the
risk-premium matrix, with markdown/CSV/JSON emitters.

Grid semantics.  Strikes and barriers are addressed by Black-Scholes call
delta at the grid's maturity; the level actually used is the full-precision
delta-to-level conversion, never a rounded number.  A barrier delta equal to
VANILLA_SENTINEL marks the no-barrier column, and barrier columns exist only
where the barrier delta is strictly below the strike delta (the barrier then
sits strictly above the strike).  Each populated cell carries up to five
numbers:

  continuous_price  closed form, continuous monitoring, at the grid rate
  lattice_value     discretized risk-neutral value (drift-free by build)
  value_gaussian    initial hedging capital, Gaussian law with real drift
  eps_gaussian      hedging risk of that Gaussian run
  model_value/eps   same pair under the supplied non-Gaussian model
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bsref import BsParams, bs_uoc_continuous, bs_vanilla, delta_to_level, gaussian_increment
from .calibration import CumulantFunction, MarketParams, gaussian_model
from .distribution import InversionConfig, discretize, lattice_moments
from .engine import UpAndOutCall, hedge_report
from .errors import ConfigError
from .pricing import premium_ratio

STRIKE_DELTAS = (0.01, 0.10, 0.30, 0.45, 0.49, 0.75, 0.99)
BARRIER_DELTAS = (1e-100, 0.01, 0.10, 0.30, 0.45, 0.49)
VANILLA_SENTINEL = 1e-100

DEFAULT_INTERVALS = (
    ("5 min", 1.0 / 24000.0),
    ("15 min", 1.0 / 8000.0),
    ("30 min", 1.0 / 4000.0),
    ("1 hour", 1.0 / 2000.0),
    ("2 hours", 1.0 / 1000.0),
    ("4 hours", 1.0 / 500.0),
    ("1 day", 1.0 / 250.0),
)


@dataclass(frozen=True)
class GridCell:
    strike_delta: float
    barrier_delta: float
    strike: float
    barrier: float | None
    continuous_price: float
    lattice_value: float
    value_gaussian: float | None = None
    eps_gaussian: float | None = None
    model_value: float | None = None
    model_eps: float | None = None


@dataclass
class GridReport:
    maturity: float
    s0: float
    market: MarketParams
    eta: float
    alpha: float
    model_label: str | None
    cells: list[GridCell] = field(default_factory=list)

    def cell(self, strike_delta: float, barrier_delta: float) -> GridCell:
        for c in self.cells:
            if c.strike_delta == strike_delta and c.barrier_delta == barrier_delta:
                return c
        raise KeyError((strike_delta, barrier_delta))


def build_grid(market: MarketParams, maturity: float, s0: float = 100.0,
               cfg: InversionConfig = InversionConfig(),
               model: CumulantFunction | None = None,
               include: set | None = None,
               compute_errors: bool = True) -> GridReport:
    """Populate the delta-addressed grid.

    include, when given, restricts the work to those (strike_delta,
    barrier_delta) pairs; compute_errors=False stops after the risk-neutral
    values (no Gaussian-with-drift or risk columns).
    """
    bs = BsParams(s0=s0, sigma=market.sigma, r=market.r, mu=market.mu, t=maturity)
    dist_rn = discretize(gaussian_increment(bs, market.delta, "risk_neutral"),
                         market.delta, cfg)
    dist_ph = discretize(gaussian_increment(bs, market.delta, "physical"),
                         market.delta, cfg) if compute_errors else None
    dist_model = discretize(model, market.delta, cfg) if model is not None else None

    report = GridReport(maturity=maturity, s0=s0, market=market,
                        eta=cfg.eta, alpha=cfg.alpha,
                        model_label=model.label if model is not None else None)
    for dk in STRIKE_DELTAS:
        for db in BARRIER_DELTAS:
            vanilla = db == VANILLA_SENTINEL
            if not vanilla and db >= dk:
                continue
            if include is not None and (dk, db) not in include:
                continue
            strike = delta_to_level(bs, dk)
            barrier = None if vanilla else delta_to_level(bs, db)
            option = UpAndOutCall(strike, maturity, barrier,
                                  None if vanilla else market.delta)
            continuous = bs_vanilla(bs, strike)[0] if vanilla \
                else bs_uoc_continuous(bs, strike, barrier)
            lattice_value = hedge_report(option, dist_rn, market, s0,
                                         compute_errors=False)
            value_g = eps_g = model_v = model_e = None
            if compute_errors:
                rep = hedge_report(option, dist_ph, market, s0)
                value_g, eps_g = rep.v0, rep.eps_optimal
            if dist_model is not None:
                if compute_errors:
                    repm = hedge_report(option, dist_model, market, s0)
                    model_v, model_e = repm.v0, repm.eps_optimal
                else:
                    model_v = hedge_report(option, dist_model, market, s0,
                                           compute_errors=False)
            report.cells.append(GridCell(
                strike_delta=dk, barrier_delta=db, strike=strike, barrier=barrier,
                continuous_price=continuous, lattice_value=lattice_value,
                value_gaussian=value_g, eps_gaussian=eps_g,
                model_value=model_v, model_eps=model_e))
    return report


_ROW_KINDS = (
    ("continuous_price", "continuous closed form"),
    ("lattice_value", "lattice value (risk-neutral)"),
    ("eps_gaussian", "hedging risk (gaussian)"),
    ("model_value", "lattice value (model)"),
    ("model_eps", "hedging risk (model)"),
)


def _column_label(db: float) -> str:
    return "no barrier" if db == VANILLA_SENTINEL else f"barrier@{db:g}"


def grid_to_markdown(report: GridReport, digits: int = 3) -> str:
    lines = [
        f"Grid: maturity {report.maturity:g}y, s0 {report.s0:g}, "
        f"mu {report.market.mu:g}, sigma {report.market.sigma:g}, "
        f"r {report.market.r:g}, period {report.market.delta:g}y, "
        f"eta {report.eta:g}, tail alpha {report.alpha:g}"
        + (f", model {report.model_label}" if report.model_label else ""),
        "",
        "| strike / quantity | " + " | ".join(_column_label(db) for db in BARRIER_DELTAS) + " |",
        "|" + "---|" * (len(BARRIER_DELTAS) + 1),
    ]
    by_key = {(c.strike_delta, c.barrier_delta): c for c in report.cells}
    for dk in STRIKE_DELTAS:
        row_cells = [by_key.get((dk, db)) for db in BARRIER_DELTAS]
        if not any(row_cells):
            continue
        lines.append(f"| **strike@{dk:g}** |" + " |" * len(BARRIER_DELTAS))
        for attr, label in _ROW_KINDS:
            values = []
            for c in row_cells:
                v = getattr(c, attr) if c is not None else None
                values.append("—" if v is None else f"{v:.{digits}f}")
            if all(v == "—" for v in values):
                continue
            lines.append(f"| {label} | " + " | ".join(values) + " |")
    return "\n".join(lines) + "\n"


def grid_to_csv(report: GridReport) -> str:
    header = ("strike_delta,barrier_delta,strike,barrier,continuous_price,"
              "lattice_value,value_gaussian,eps_gaussian,model_value,model_eps")
    rows = [header]
    for c in report.cells:
        def fmt(v):
            return "" if v is None else repr(float(v))
        rows.append(",".join([repr(c.strike_delta), repr(c.barrier_delta),
                              fmt(c.strike), fmt(c.barrier), fmt(c.continuous_price),
                              fmt(c.lattice_value), fmt(c.value_gaussian),
                              fmt(c.eps_gaussian), fmt(c.model_value), fmt(c.model_eps)]))
    return "\n".join(rows) + "\n"


def premium_grid(report: GridReport, loading_maturity: float | None = None,
                 source: str = "model") -> list[dict]:
    """sqrt(T)*eps/value per cell, from the model rows (or the Gaussian ones).

    loading_maturity defaults to the grid maturity; passing another horizon
    reproduces quotes whose loading was scaled with a reference maturity.
    """
    t_load = report.maturity if loading_maturity is None else loading_maturity
    if source == "model":
        pick = lambda c: (c.model_value, c.model_eps)
    elif source == "gaussian":
        pick = lambda c: (c.value_gaussian, c.eps_gaussian)
    else:
        raise ConfigError("source must be 'model' or 'gaussian'", source=source)
    out = []
    for c in report.cells:
        value, eps = pick(c)
        ratio = None
        if value is not None and eps is not None:
            ratio = premium_ratio(value, eps, t_load)
        out.append({"strike_delta": c.strike_delta, "barrier_delta": c.barrier_delta,
                    "value": value, "eps": eps, "ratio": ratio})
    return out


def premium_to_markdown(report: GridReport, rows: list[dict]) -> str:
    by_key = {(r["strike_delta"], r["barrier_delta"]): r for r in rows}
    lines = [
        "| strike | " + " | ".join(_column_label(db) for db in BARRIER_DELTAS) + " |",
        "|" + "---|" * (len(BARRIER_DELTAS) + 1),
    ]
    for dk in STRIKE_DELTAS:
        cells = []
        seen = False
        for db in BARRIER_DELTAS:
            r = by_key.get((dk, db))
            if r is None:
                cells.append("—")
            elif r["ratio"] is None:
                cells.append("n/a")
                seen = True
            else:
                cells.append(f"{100.0 * r['ratio']:.1f}%")
                seen = True
        if seen:
            lines.append(f"| strike@{dk:g} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ScalingRow:
    label: str
    interval: float
    steps_per_day: int
    log_kurtosis: float
    tau: float
    eps: dict              # product label -> risk
    ratio: dict            # product label -> risk / daily risk (daily row: 1)
    fitted_alpha: dict     # product label -> variance-mixing exponent weight


def _mixing_alpha(tau: float, ratio: float) -> float | None:
    """Solve ratio^2 = alpha*tau + (1-alpha)*sqrt(tau) for alpha."""
    rt = math.sqrt(tau)
    if abs(rt - tau) < 1e-12:
        return None
    return (rt - ratio * ratio) / (rt - tau)


def scaling_study(mu: float, sigma: float, r: float = 0.0,
                  maturity: float = 21.0 / 250.0, s0: float = 100.0,
                  strike: float = 103.3, barriers: tuple = (114.6, 107.9),
                  monitoring_interval: float = 1.0 / 250.0,
                  intervals=DEFAULT_INTERVALS,
                  cfg: InversionConfig = InversionConfig(),
                  model: CumulantFunction | None = None) -> list[ScalingRow]:
    """Hedging risk versus rebalancing interval, at fixed strike/barriers.

    The knockout is checked once per monitoring_interval regardless of how
    often the hedge trades.  The reference row is the coarsest interval
    (last in intervals); ratios and the mixing weight alpha compare each
    finer interval against it, where tau = (interval ratio) * (excess-
    kurtosis-free scaling of the one-period fourth moment): for row risks
    driven by second moments the ratio behaves like sqrt(tau); pure
    discontinuity-driven risks scale like tau^(1/4).
    """
    rows = []
    ref_delta = intervals[-1][1]
    products: list[tuple[str, float | None]] = [("vanilla", None)]
    products += [(f"barrier@{b:g}", b) for b in barriers]

    ref_kurt = None
    for label, delta in intervals:
        market = MarketParams(mu=mu, sigma=sigma, r=r, delta=delta)
        if model is None:
            law = gaussian_model(mu - 0.5 * sigma * sigma, sigma)
        else:
            law = model
        dist = discretize(law, delta, cfg)
        kurt = law.cumulants(delta).kurtosis
        eps = {}
        for name, barrier in products:
            option = UpAndOutCall(strike, maturity, barrier,
                                  None if barrier is None else monitoring_interval)
            rep = hedge_report(option, dist, market, s0)
            eps[name] = rep.eps_optimal
        rows.append((label, delta, kurt, eps))
        if delta == ref_delta:
            ref_kurt = kurt

    out = []
    ref_eps = rows[-1][3]
    for label, delta, kurt, eps in rows:
        tau = (delta / ref_delta) * (kurt - 1.0) / (ref_kurt - 1.0)
        ratio = {name: (eps[name] / ref_eps[name] if ref_eps[name] > 0 else math.nan)
                 for name, _ in products}
        alpha = {name: _mixing_alpha(tau, ratio[name]) for name, _ in products}
        out.append(ScalingRow(label=label, interval=delta,
                              steps_per_day=round(1.0 / (250.0 * delta)) or 1,
                              log_kurtosis=kurt, tau=tau,
                              eps=eps, ratio=ratio, fitted_alpha=alpha))
    return out


def scaling_to_markdown(rows: list[ScalingRow]) -> str:
    products = list(rows[0].eps.keys())
    head = ["interval", "steps/day", "kurtosis", "tau"]
    for p in products:
        head += [f"risk {p}", f"ratio {p}", f"alpha {p}"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for row in rows:
        cells = [row.label, str(round(1.0 / (250.0 * row.interval))),
                 f"{row.log_kurtosis:.3f}", f"{row.tau:.5f}"]
        for p in products:
            a = row.fitted_alpha[p]
            cells += [f"{row.eps[p]:.5f}", f"{row.ratio[p]:.4f}",
                      "—" if a is None else f"{a:.3f}"]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def scaling_to_csv(rows: list[ScalingRow]) -> str:
    products = list(rows[0].eps.keys())
    head = ["interval_years", "steps_per_day", "log_kurtosis", "tau"]
    for p in products:
        head += [f"eps[{p}]", f"ratio[{p}]", f"alpha[{p}]"]
    lines = [",".join(head)]
    for row in rows:
        cells = [repr(row.interval), str(round(1.0 / (250.0 * row.interval))),
                 repr(row.log_kurtosis), repr(row.tau)]
        for p in products:
            a = row.fitted_alpha[p]
            cells += [repr(row.eps[p]), repr(row.ratio[p]), "" if a is None else repr(a)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class KurtosisRow:
    label: str
    interval: float
    analytic_log_kurtosis: float
    lattice_log_kurtosis: float
    lattice_level_kurtosis: float
    n_down: int
    n_up: int
    extent_sd: float


def kurtosis_table(model: CumulantFunction, intervals=DEFAULT_INTERVALS,
                   cfg: InversionConfig = InversionConfig()) -> list[KurtosisRow]:
    """Analytic vs discretized kurtosis per period length, with grid extents."""
    out = []
    for label, delta in intervals:
        dist = discretize(model, delta, cfg)
        analytic = model.cumulants(delta)
        latt = lattice_moments(dist)
        sd = math.sqrt(analytic.variance)
        out.append(KurtosisRow(
            label=label, interval=delta,
            analytic_log_kurtosis=analytic.kurtosis,
            lattice_log_kurtosis=latt.log.kurtosis,
            lattice_level_kurtosis=latt.level.kurtosis,
            n_down=dist.n_down, n_up=dist.n_up,
            extent_sd=max(dist.n_down, dist.n_up) * dist.eta / sd))
    return out


def kurtosis_to_markdown(rows: list[KurtosisRow]) -> str:
    lines = [
        "| interval | analytic log kurt | lattice log kurt | lattice level kurt "
        "| bins down/up | extent (period sd) |",
        "|---|---|---|---|---|---|",
    ]
    for row in rows:
        quarter = math.ceil(row.extent_sd * 4.0) / 4.0
        lines.append(
            f"| {row.label} | {row.analytic_log_kurtosis:.4f} "
            f"| {row.lattice_log_kurtosis:.4f} | {row.lattice_level_kurtosis:.4f} "
            f"| {row.n_down}/{row.n_up} | {row.extent_sd:.2f} (~{quarter:g}) |")
    return "\n".join(lines) + "\n"


def run_manifest(kind: str, cfg: InversionConfig, **params) -> str:
    """JSON record of every knob that shaped a run, for reproducibility."""
    body = {"kind": kind,
            "inversion": {"eta": cfg.eta, "alpha": cfg.alpha,
                          "c_min": cfg.c_min, "c_max": cfg.c_max,
                          "trunc_tol": cfg.trunc_tol,
                          "richardson_tol": cfg.richardson_tol}}
    for key, value in params.items():
        if isinstance(value, MarketParams):
            body[key] = asdict(value)
        elif isinstance(value, GridReport):
            body[key] = {"maturity": value.maturity, "s0": value.s0,
                         "eta": value.eta, "alpha": value.alpha,
                         "model": value.model_label,
                         "cells": [asdict(c) for c in value.cells]}
        elif isinstance(value, np.ndarray):
            body[key] = value.tolist()
        else:
            body[key] = value
    return json.dumps(body, indent=2, default=str)
