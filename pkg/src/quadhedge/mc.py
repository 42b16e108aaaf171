"""Monte Carlo verification of the hedging engine.

simulate_hedge replays the discretized chain path by path, applies the
engine's stored hedge surfaces, and reports the empirical mean and standard
deviation of the terminal shortfall; both should agree with the engine's
analytic risk within sampling error.

brute_force_optimum is an exact-rational dynamic program over the
non-recombining tree of a small instance: the cost-to-go of the quadratic
criterion is a quadratic polynomial in current wealth, the per-period
control is minimized analytically, and all arithmetic is done in Fractions,
so the returned optimal initial capital and risk are exact for the given
(floating point) inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .distribution import IncrementDistribution
from .engine import HedgeReport, LatticeRun
from .errors import ConfigError

_MAX_TREE_LEAVES = 200_000


@dataclass(frozen=True)
class SimConfig:
    paths: int
    seed: int
    strategy: str = "optimal"          # "optimal" or "local"
    initial_capital: float | None = None   # defaults to the engine value V0

    def __post_init__(self):
        if self.paths < 2:
            raise ConfigError("paths must be at least 2", paths=self.paths)
        if self.strategy not in ("optimal", "local"):
            raise ConfigError("strategy must be 'optimal' or 'local'", strategy=self.strategy)


@dataclass(frozen=True)
class SimResult:
    mean: float
    std: float
    se_mean: float
    se_std: float
    paths: int
    dead_fraction: float
    strategy: str
    initial_capital: float
    target_eps: float


def simulate_hedge(run: LatticeRun, report: HedgeReport, config: SimConfig) -> SimResult:
    """Simulate the self-financing hedge on the discretized chain.

    Returns statistics of the terminal shortfall (wealth minus payoff).  The
    run must have been produced with an on-grid barrier and the report with
    keep_surfaces=True.
    """
    if report.value_surfaces is None or report.hedge_surfaces is None:
        raise ConfigError("simulation needs a report built with keep_surfaces=True")
    dist, coeffs = run.dist, run.coeffs
    n, nd = run.n_steps, dist.n_down
    r_gross, a = coeffs.gross_rate, coeffs.a
    q, monitor_every = run.barrier_offset, run.monitor_every
    x0 = run.v0 if config.initial_capital is None else config.initial_capital

    levels = np.exp(dist.support)
    x_by_offset = levels - r_gross
    cum = np.cumsum(dist.probs)

    rng = np.random.Generator(np.random.PCG64(config.seed))
    k = np.zeros(config.paths, dtype=np.int64)
    alive = np.ones(config.paths, dtype=bool)
    wealth = np.full(config.paths, x0)

    for i in range(n):
        idx = k + i * nd
        price = run.s0 * np.exp(k * dist.eta)
        value = report.value_surfaces[i][idx]
        hedge = report.hedge_surfaces[i][idx]
        if config.strategy == "optimal":
            theta = np.where(alive,
                             hedge + a * r_gross * (value - wealth) / price,
                             -a * r_gross * wealth / price)
        else:
            theta = np.where(alive, hedge, 0.0)

        draws = np.searchsorted(cum, rng.random(config.paths), side="right")
        np.clip(draws, 0, levels.size - 1, out=draws)
        wealth = r_gross * wealth + theta * price * x_by_offset[draws]
        k = k + (draws - nd)
        if q is not None and (i + 1) % monitor_every == 0:
            alive &= k <= q

    payoff = np.where(alive, np.maximum(run.s0 * np.exp(k * dist.eta) - run.option.strike, 0.0), 0.0)
    shortfall = wealth - payoff

    mean = float(shortfall.mean())
    centered = shortfall - mean
    m2 = float((centered ** 2).mean())
    m4 = float((centered ** 4).mean())
    std = math.sqrt(m2)
    se_mean = std / math.sqrt(config.paths)
    se_std = math.sqrt(max(m4 - m2 * m2, 0.0) / config.paths) / (2.0 * std) if std > 0 else 0.0
    return SimResult(mean=mean, std=std, se_mean=se_mean, se_std=se_std,
                     paths=config.paths, dead_fraction=float(1.0 - alive.mean()),
                     strategy=config.strategy, initial_capital=x0,
                     target_eps=report.eps_optimal)


def brute_force_optimum(dist: IncrementDistribution, gross_rate: float, s0: float,
                        strike: float, n_steps: int,
                        barrier_offset: int | None = None,
                        monitor_every: int = 1) -> dict:
    """Exact optimal initial capital and squared risk for a small instance.

    Walks the full non-recombining tree in rational arithmetic, carrying the
    cost-to-go E[(terminal wealth - payoff)^2] as a quadratic in current
    wealth and minimizing each period's holding analytically.  Knockout is
    evaluated path by path (offset above barrier_offset on a monitoring
    date), so no Markov reduction is assumed.
    """
    kernel = dist.probs.size
    if kernel ** n_steps > _MAX_TREE_LEAVES:
        raise ConfigError("instance too large for tree enumeration",
                          kernel=kernel, n_steps=n_steps)
    probs = [Fraction(float(p)) for p in dist.probs]
    levels = [Fraction(float(v)) for v in np.exp(dist.support)]
    rate = Fraction(float(gross_rate))
    xs = [lv - rate for lv in levels]
    spot0 = Fraction(float(s0))
    strike_f = Fraction(float(strike))

    def cost(step: int, offset: int, price: Fraction, alive: bool):
        """Quadratic (c2, c1, c0) with E[(G_n - H)^2 | state] = c2 G^2 + c1 G + c0
        for wealth G held at this node under optimal play."""
        if step == n_steps:
            if alive:
                payoff = price - strike_f if price > strike_f else Fraction(0)
            else:
                payoff = Fraction(0)
            return (Fraction(1), -2 * payoff, payoff * payoff)

        m2 = m2x = m2xx = m1 = m1x = m0 = Fraction(0)
        for j in range(kernel):
            if probs[j] == 0:
                continue
            child_offset = offset + (j - dist.n_down)
            child_alive = alive
            if (barrier_offset is not None and (step + 1) % monitor_every == 0
                    and child_offset > barrier_offset):
                child_alive = False
            c2, c1, c0 = cost(step + 1, child_offset, price * levels[j], child_alive)
            p = probs[j]
            m2 += p * c2
            m2x += p * c2 * xs[j]
            m2xx += p * c2 * xs[j] * xs[j]
            m1 += p * c1
            m1x += p * c1 * xs[j]
            m0 += p * c0

        # wealth moves as G' = R G + u X with u = holding * price; minimize
        # the quadratic in u exactly
        if m2xx > 0:
            c2 = rate * rate * (m2 - m2x * m2x / m2xx)
            c1 = rate * (m1 - m2x * m1x / m2xx)
            c0 = m0 - m1x * m1x / (4 * m2xx)
        else:
            c2, c1, c0 = rate * rate * m2, rate * m1, m0
        return (c2, c1, c0)

    c2, c1, c0 = cost(0, 0, spot0, True)
    x_star = -c1 / (2 * c2)
    eps2 = c0 - c1 * c1 / (4 * c2)
    return {"x_star": float(x_star), "eps2": float(eps2),
            "capital_weight": float(c2)}
