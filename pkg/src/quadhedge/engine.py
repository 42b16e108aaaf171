"""Discrete-time variance-optimal hedging engine on a log-price lattice.

The engine prices an up-and-out call (or vanilla call) under an i.i.d.
discretized log-return law and accumulates the per-period quadratic hedging
risk of both the dynamically optimal strategy and the locally optimal one.

Layout.  After i periods the log price sits at ln(s0) + k*eta with integer
offset k in [-i*n_down, i*n_up]; arrays over that range use index
idx = k + i*n_down.  One backward step is a correlation of the next value
surface with the one-period kernel, so the whole pass is a handful of
np.correlate calls per period.  Value surfaces are checkpointed at barrier
monitoring dates (plus subdivision points); the error pass walks forward
through each block, rebuilding the intermediate surfaces from the checkpoint
at the block's right edge while pushing the occupancy distribution through
the same kernel.

Knockout handling.  The barrier is snapped to the nearest half-grid level
(q + 1/2)*eta; nodes k >= q+1 at a monitoring date are dead.  Death is
absorbing, the claim value on dead paths is zero, and the locally optimal
hedge there is flat, so dead probability mass leaves the lattice (into a
tracked scalar) and contributes no further risk.  Reported quantities for an
off-grid barrier come from linear interpolation in ln(barrier) between the
two adjacent half-grid runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calibration import MarketParams
from .distribution import IncrementDistribution
from .errors import ConfigError, EngineError

# tolerance for "the barrier already sits on a half-grid level", in units of eta
_HALF_GRID_SNAP = 1e-9
# conservation check for the forward occupancy pass
_LEAKAGE_TOL = 1e-9


@dataclass(frozen=True)
class UpAndOutCall:
    """Call option, optionally knocked out when the price is at or above a barrier
    on a monitoring date (monitoring dates include maturity)."""

    strike: float
    maturity: float
    barrier: float | None = None
    monitoring_interval: float | None = None

    def __post_init__(self):
        if not (self.strike > 0.0):
            raise ConfigError("strike must be positive", strike=self.strike)
        if not (self.maturity > 0.0):
            raise ConfigError("maturity must be positive", maturity=self.maturity)
        if self.barrier is not None and not (self.barrier > 0.0):
            raise ConfigError("barrier must be positive", barrier=self.barrier)
        if self.monitoring_interval is not None and not (self.monitoring_interval > 0.0):
            raise ConfigError("monitoring_interval must be positive",
                              monitoring_interval=self.monitoring_interval)


@dataclass(frozen=True)
class OnePeriodCoefficients:
    """Moments of the one-period excess growth X = e^Z - R and derived constants.

    a = E[X]/E[X^2] and b = 1 - a*E[X] drive both the value recursion
    V_i = E[(1 - a X) V_{i+1}] / (b R) and the risk compounding factor R^2 b.
    """

    gross_rate: float
    ex: float
    ex2: float
    a: float
    b: float

    @property
    def x_variance(self) -> float:
        return self.ex2 - self.ex * self.ex


def coefficients(dist: IncrementDistribution, gross_rate: float) -> OnePeriodCoefficients:
    levels = np.exp(dist.support)
    x = levels - gross_rate
    ex = float(dist.probs @ x)
    ex2 = float(dist.probs @ (x * x))
    if not (ex2 > 0.0):
        raise EngineError("one-period law is degenerate (E[X^2] = 0)", ex2=ex2)
    a = ex / ex2
    b = 1.0 - a * ex
    if not (b > 0.0):
        raise EngineError("one-period law admits a riskless arbitrage-like profile (b <= 0)",
                          a=a, b=b, ex=ex, ex2=ex2)
    return OnePeriodCoefficients(gross_rate=gross_rate, ex=ex, ex2=ex2, a=a, b=b)


@dataclass
class LatticeRun:
    """Backward-induction output: initial value plus checkpointed surfaces."""

    option: UpAndOutCall
    dist: IncrementDistribution
    params: MarketParams
    s0: float
    coeffs: OnePeriodCoefficients
    n_steps: int
    monitor_every: int | None
    barrier_offset: int | None
    snapped_barrier: float | None
    v0: float
    checkpoint_steps: list[int]
    checkpoints: dict[int, np.ndarray]

    def node_prices(self, step: int) -> np.ndarray:
        k = np.arange(-step * self.dist.n_down, step * self.dist.n_up + 1)
        return self.s0 * np.exp(k * self.dist.eta)


@dataclass
class HedgeReport:
    """Initial value, initial hedge, and accumulated quadratic risk."""

    v0: float
    xi0: float
    eps2_optimal: float
    eps2_local: float
    psi_means: np.ndarray
    capital_weight_optimal: float
    capital_weight_local: float
    n_steps: int
    coeffs: OnePeriodCoefficients
    dead_mass: float
    diagnostics: dict = field(default_factory=dict)
    value_surfaces: list[np.ndarray] | None = None
    hedge_surfaces: list[np.ndarray] | None = None

    @property
    def eps_optimal(self) -> float:
        return math.sqrt(max(self.eps2_optimal, 0.0))

    @property
    def eps_local(self) -> float:
        return math.sqrt(max(self.eps2_local, 0.0))

    def expected_shortfall_squared(self, x: float) -> float:
        """E[(terminal wealth - claim)^2] for the optimal strategy started at x."""
        return self.capital_weight_optimal * (x - self.v0) ** 2 + self.eps2_optimal


def _steps_from_duration(duration: float, delta: float, what: str) -> int:
    ratio = duration / delta
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-6 * max(1.0, abs(ratio)):
        raise ConfigError(f"{what} must be a whole number of periods",
                          duration=duration, delta=delta, ratio=ratio)
    return n


def _barrier_offset(dist: IncrementDistribution, s0: float, barrier: float) -> int:
    """Integer q so that the half-grid level (q + 1/2)*eta approximates ln(B/s0);
    nodes k >= q+1 are at or above the snapped barrier."""
    units = math.log(barrier / s0) / dist.eta
    return int(round(units - 0.5))


def _checkpoint_steps(n: int, monitor_every: int | None, max_block: int) -> list[int]:
    anchors = [0]
    if monitor_every is not None:
        anchors += list(range(monitor_every, n + 1, monitor_every))
    else:
        anchors.append(n)
    steps = set(anchors)
    for lo, hi in zip(anchors[:-1], anchors[1:]):
        gap = hi - lo
        if gap > max_block:
            parts = math.ceil(gap / max_block)
            for t in range(1, parts):
                steps.add(lo + round(t * gap / parts))
    return sorted(steps)


def backward_induct(option: UpAndOutCall, dist: IncrementDistribution,
                    params: MarketParams, s0: float,
                    barrier_offset: int | None = None,
                    max_block_steps: int = 128) -> LatticeRun:
    """Backward value recursion; returns V_0 and checkpointed value surfaces.

    barrier_offset overrides the snapping of option.barrier (used by the
    interpolation wrapper to evaluate the two adjacent half-grid barriers).
    """
    if not (s0 > 0.0):
        raise ConfigError("s0 must be positive", s0=s0)
    if abs(dist.delta - params.delta) > 1e-12 * max(dist.delta, params.delta):
        raise ConfigError("distribution and market parameters disagree on the period length",
                          dist_delta=dist.delta, params_delta=params.delta)
    n = _steps_from_duration(option.maturity, params.delta, "maturity")

    monitor_every = None
    q = None
    snapped = None
    if option.barrier is not None:
        if option.barrier <= s0:
            raise ConfigError("barrier must exceed the initial price",
                              barrier=option.barrier, s0=s0)
        interval = option.monitoring_interval if option.monitoring_interval is not None \
            else params.delta
        monitor_every = _steps_from_duration(interval, params.delta, "monitoring interval")
        if n % monitor_every != 0:
            raise ConfigError("maturity must be a whole number of monitoring intervals",
                              n_steps=n, monitor_every=monitor_every)
        q = barrier_offset if barrier_offset is not None \
            else _barrier_offset(dist, s0, option.barrier)
        if q < 0:
            raise ConfigError("barrier lies below the first lattice level above s0",
                              barrier=option.barrier, s0=s0, eta=dist.eta)
        snapped = s0 * math.exp((q + 0.5) * dist.eta)

    coeffs = coefficients(dist, params.gross_rate)
    nd, nu = dist.n_down, dist.n_up
    levels = np.exp(dist.support)
    kernel_value = dist.probs * (1.0 - coeffs.a * (levels - coeffs.gross_rate))
    scale = coeffs.b * coeffs.gross_rate

    checkpoint_steps = _checkpoint_steps(n, monitor_every, max_block_steps)
    checkpoint_set = set(checkpoint_steps)
    checkpoints: dict[int, np.ndarray] = {}

    k = np.arange(-n * nd, n * nu + 1)
    v = np.maximum(s0 * np.exp(k * dist.eta) - option.strike, 0.0)
    if q is not None:
        v[q + 1 + n * nd:] = 0.0
    checkpoints[n] = v.copy()

    for i in range(n - 1, -1, -1):
        v = np.correlate(v, kernel_value, mode="valid") / scale
        if q is not None and i > 0 and i % monitor_every == 0:
            v[q + 1 + i * nd:] = 0.0
        if i in checkpoint_set:
            checkpoints[i] = v.copy()

    v0 = float(v[0])
    return LatticeRun(option=option, dist=dist, params=params, s0=s0, coeffs=coeffs,
                      n_steps=n, monitor_every=monitor_every, barrier_offset=q,
                      snapped_barrier=snapped, v0=v0,
                      checkpoint_steps=checkpoint_steps, checkpoints=checkpoints)


def _block_surfaces(run: LatticeRun, lo: int, hi: int) -> dict[int, np.ndarray]:
    """Rebuild value surfaces for steps lo+1 .. hi-1 from the checkpoint at hi.

    Blocks never contain an interior monitoring date, so no masking is needed.
    """
    coeffs = run.coeffs
    levels = np.exp(run.dist.support)
    kernel_value = run.dist.probs * (1.0 - coeffs.a * (levels - coeffs.gross_rate))
    scale = coeffs.b * coeffs.gross_rate
    out: dict[int, np.ndarray] = {}
    v = run.checkpoints[hi]
    for i in range(hi - 1, lo, -1):
        v = np.correlate(v, kernel_value, mode="valid") / scale
        out[i] = v
    return out


def error_accumulate(run: LatticeRun, keep_surfaces: bool = False) -> HedgeReport:
    """Forward pass: per-period quadratic risks and their compounded totals.

    For each period i the conditional risk on node k is
        psi_i(k) = E[(R V_i + xi_i S_i X - V_{i+1})^2 | k],
    with xi_i the locally optimal hedge; E[psi_i] integrates it against the
    occupancy distribution of still-alive paths.  The optimal strategy's
    total risk compounds E[psi_i] by (R^2 b)^(n-1-i), the locally optimal
    one by R^(2(n-1-i)).
    """
    dist, coeffs = run.dist, run.coeffs
    n, nd, nu = run.n_steps, dist.n_down, dist.n_up
    r_gross, a, b, ex, ex2 = (coeffs.gross_rate, coeffs.a, coeffs.b,
                              coeffs.ex, coeffs.ex2)
    q, monitor_every = run.barrier_offset, run.monitor_every

    levels = np.exp(dist.support)
    x = levels - r_gross
    kernel_p = dist.probs.copy()
    kernel_px = dist.probs * x

    psi_means = np.zeros(n)
    prob = np.ones(1)
    dead_mass = 0.0
    xi0 = 0.0
    value_surfaces: list[np.ndarray] | None = [run.checkpoints[0]] if keep_surfaces else None
    hedge_surfaces: list[np.ndarray] | None = [] if keep_surfaces else None

    steps = run.checkpoint_steps
    for lo, hi in zip(steps[:-1], steps[1:]):
        block = _block_surfaces(run, lo, hi)
        for i in range(lo, hi):
            v_i = run.checkpoints[lo] if i == lo else block[i]
            v_next = block[i + 1] if i + 1 < hi else run.checkpoints[hi]

            c1 = np.correlate(v_next, kernel_px, mode="valid")
            growth = r_gross * v_i
            xi_s = (c1 - growth * ex) / ex2
            # sum of squares of the one-step hedging residuals: free of the
            # cancellation that the expanded quadratic would suffer
            width = growth.size
            psi = np.zeros(width)
            for s in range(kernel_p.size):
                resid = growth + xi_s * x[s] - v_next[s:s + width]
                psi += kernel_p[s] * resid * resid

            if i == 0:
                xi0 = float(xi_s[0]) / run.s0
            psi_means[i] = float(prob @ psi)
            if keep_surfaces:
                value_surfaces.append(v_next)
                hedge_surfaces.append(xi_s / run.node_prices(i))

            prob = np.convolve(prob, kernel_p)
            if q is not None and (i + 1) % monitor_every == 0:
                cut = q + 1 + (i + 1) * nd
                if cut < prob.size:
                    dead_mass += float(prob[cut:].sum())
                    prob[cut:] = 0.0

    leakage = abs(float(prob.sum()) + dead_mass - 1.0)
    if leakage > _LEAKAGE_TOL:
        raise EngineError("forward occupancy mass is not conserved",
                          leakage=leakage, dead_mass=dead_mass)

    idx = np.arange(n)
    w_optimal = (r_gross * r_gross * b) ** (n - 1 - idx)
    w_local = r_gross ** (2 * (n - 1 - idx))
    eps2_optimal = float(w_optimal @ psi_means)
    eps2_local = float(w_local @ psi_means)

    return HedgeReport(
        v0=run.v0, xi0=xi0,
        eps2_optimal=eps2_optimal, eps2_local=eps2_local, psi_means=psi_means,
        capital_weight_optimal=(r_gross * r_gross * b) ** n,
        capital_weight_local=r_gross ** (2 * n),
        n_steps=n, coeffs=coeffs, dead_mass=dead_mass,
        diagnostics={"leakage": leakage,
                     "snapped_barrier": run.snapped_barrier,
                     "barrier_offset": run.barrier_offset},
        value_surfaces=value_surfaces, hedge_surfaces=hedge_surfaces,
    )


def _interpolation_weight(dist: IncrementDistribution, s0: float, barrier: float) -> tuple:
    """(q_low, t): barrier position between half-grid levels q+1/2 and q+3/2."""
    units = math.log(barrier / s0) / dist.eta - 0.5
    q_low = math.floor(units)
    t = units - q_low
    if t < _HALF_GRID_SNAP:
        return q_low, 0.0
    if t > 1.0 - _HALF_GRID_SNAP:
        return q_low + 1, 0.0
    return q_low, t


def hedge_report(option: UpAndOutCall, dist: IncrementDistribution,
                 params: MarketParams, s0: float,
                 compute_errors: bool = True, keep_surfaces: bool = False,
                 max_block_steps: int = 128):
    """Value (and optionally risk) for the option, interpolating off-grid barriers.

    Returns a HedgeReport when compute_errors, else just the initial value.
    For a barrier between half-grid lattice levels, the engine runs the two
    adjacent snapped barriers and interpolates V_0 and the squared risks
    linearly in ln(barrier); surfaces can only be kept for on-grid runs.
    """
    if option.barrier is None:
        run = backward_induct(option, dist, params, s0, max_block_steps=max_block_steps)
        if not compute_errors:
            return run.v0
        return error_accumulate(run, keep_surfaces=keep_surfaces)

    q_low, t = _interpolation_weight(dist, s0, option.barrier)
    if t == 0.0:
        run = backward_induct(option, dist, params, s0, barrier_offset=q_low,
                              max_block_steps=max_block_steps)
        if not compute_errors:
            return run.v0
        return error_accumulate(run, keep_surfaces=keep_surfaces)

    if keep_surfaces:
        raise ConfigError("surfaces require an on-grid barrier; simulate with a snapped barrier",
                          barrier=option.barrier)
    run_lo = backward_induct(option, dist, params, s0, barrier_offset=q_low,
                             max_block_steps=max_block_steps)
    run_hi = backward_induct(option, dist, params, s0, barrier_offset=q_low + 1,
                             max_block_steps=max_block_steps)
    if not compute_errors:
        return (1.0 - t) * run_lo.v0 + t * run_hi.v0

    rep_lo = error_accumulate(run_lo)
    rep_hi = error_accumulate(run_hi)

    def mix(u, w):
        return (1.0 - t) * u + t * w

    return HedgeReport(
        v0=mix(rep_lo.v0, rep_hi.v0),
        xi0=mix(rep_lo.xi0, rep_hi.xi0),
        eps2_optimal=mix(rep_lo.eps2_optimal, rep_hi.eps2_optimal),
        eps2_local=mix(rep_lo.eps2_local, rep_hi.eps2_local),
        psi_means=mix(rep_lo.psi_means, rep_hi.psi_means),
        capital_weight_optimal=rep_lo.capital_weight_optimal,
        capital_weight_local=rep_lo.capital_weight_local,
        n_steps=rep_lo.n_steps, coeffs=rep_lo.coeffs,
        dead_mass=mix(rep_lo.dead_mass, rep_hi.dead_mass),
        diagnostics={"interpolation_weight": t,
                     "barrier_offsets": (q_low, q_low + 1),
                     "snapped_barriers": (run_lo.snapped_barrier, run_hi.snapped_barrier),
                     "leakage": max(rep_lo.diagnostics["leakage"],
                                    rep_hi.diagnostics["leakage"])},
    )


def constant_claim_check(dist: IncrementDistribution, params: MarketParams,
                         n_steps: int, value: float = 1.0) -> dict:
    """Self-test: a constant claim must discount exactly and carry zero risk.

    Returns the worst deviations of V_i from value/R^(n-i) and of the
    per-period risks from zero, using the same kernels as the real runs.
    """
    coeffs = coefficients(dist, params.gross_rate)
    levels = np.exp(dist.support)
    x = levels - coeffs.gross_rate
    kernel_value = dist.probs * (1.0 - coeffs.a * x)
    scale = coeffs.b * coeffs.gross_rate

    nd, nu = dist.n_down, dist.n_up
    v = np.full(n_steps * (nd + nu) + 1, value)
    worst_value = 0.0
    worst_risk = 0.0
    for i in range(n_steps - 1, -1, -1):
        v_next = v
        c1 = np.correlate(v_next, dist.probs * x, mode="valid")
        v = np.correlate(v_next, kernel_value, mode="valid") / scale
        target = value / coeffs.gross_rate ** (n_steps - i)
        worst_value = max(worst_value, float(np.abs(v - target).max()))
        growth = coeffs.gross_rate * v
        xi_s = (c1 - growth * coeffs.ex) / coeffs.ex2
        width = growth.size
        psi = np.zeros(width)
        for s in range(dist.probs.size):
            resid = growth + xi_s * x[s] - v_next[s:s + width]
            psi += dist.probs[s] * resid * resid
        worst_risk = max(worst_risk, float(np.abs(psi).max()))
    return {"worst_value_error": worst_value, "worst_risk": worst_risk}
