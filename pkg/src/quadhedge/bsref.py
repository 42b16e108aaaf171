"""Black-Scholes reference quantities.

Vanilla price/delta, delta-parametrized strike and barrier levels, the
continuously monitored up-and-out call closed form (reflection principle),
Gaussian one-period transition laws for the lattice, and the
barrier-shift continuity correction used as a discrete-monitoring
cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import ndtr, ndtri

from .calibration import CumulantFunction, gaussian_model
from .errors import ConfigError

# continuity-correction constant -zeta(1/2)/sqrt(2*pi) for discretely
# monitored barriers
BGK_BETA = 0.5826


@dataclass(frozen=True)
class BsParams:
    s0: float
    sigma: float
    r: float
    mu: float
    t: float

    def __post_init__(self):
        if not (self.s0 > 0.0 and self.sigma > 0.0 and self.t > 0.0):
            raise ConfigError("s0, sigma, t must be positive",
                              s0=self.s0, sigma=self.sigma, t=self.t)


def bs_vanilla(params: BsParams, strike: float) -> tuple[float, float]:
    """European call price and N(d1) delta."""
    if not (strike > 0.0):
        raise ConfigError("strike must be positive", strike=strike)
    s, sig, r, t = params.s0, params.sigma, params.r, params.t
    srt = sig * math.sqrt(t)
    d1 = (math.log(s / strike) + (r + 0.5 * sig * sig) * t) / srt
    d2 = d1 - srt
    price = s * ndtr(d1) - strike * math.exp(-r * t) * ndtr(d2)
    return float(price), float(ndtr(d1))


def delta_to_level(params: BsParams, delta_target: float) -> float:
    """Strike/barrier level whose call delta N(d1) equals delta_target."""
    if not (0.0 < delta_target < 1.0):
        raise ConfigError("delta_target must lie in (0, 1)", delta_target=delta_target)
    s, sig, r, t = params.s0, params.sigma, params.r, params.t
    srt = sig * math.sqrt(t)
    return float(s * math.exp(-ndtri(delta_target) * srt + (r + 0.5 * sig * sig) * t))


def bs_uoc_continuous(params: BsParams, strike: float, barrier: float) -> float:
    """Continuously monitored up-and-out call (reflection principle, no rebate)."""
    if not (strike > 0.0):
        raise ConfigError("strike must be positive", strike=strike)
    s, sig, r, t = params.s0, params.sigma, params.r, params.t
    if barrier <= s:
        return 0.0
    if strike >= barrier:
        # payoff requires S_T > K >= B, which forces a prior barrier crossing
        return 0.0
    srt = sig * math.sqrt(t)
    if math.log(barrier / s) > 12.0 * srt + abs(params.r) * t:
        return bs_vanilla(params, strike)[0]
    mu_pow = (r - 0.5 * sig * sig) / (sig * sig)
    df = math.exp(-r * t)
    hs = barrier / s

    def leg(x: float) -> float:
        return s * ndtr(x) - strike * df * ndtr(x - srt)

    def leg_ref(y: float) -> float:
        return (s * hs ** (2.0 * mu_pow + 2.0) * ndtr(-y)
                - strike * df * hs ** (2.0 * mu_pow) * ndtr(-y + srt))

    x1 = math.log(s / strike) / srt + (1.0 + mu_pow) * srt
    x2 = math.log(s / barrier) / srt + (1.0 + mu_pow) * srt
    y1 = math.log(barrier * barrier / (s * strike)) / srt + (1.0 + mu_pow) * srt
    y2 = math.log(barrier / s) / srt + (1.0 + mu_pow) * srt
    return float(leg(x1) - leg(x2) + leg_ref(y1) - leg_ref(y2))


def gaussian_increment(params: BsParams, delta: float, measure: str) -> CumulantFunction:
    """Gaussian one-period log-return law for the lattice.

    measure='risk_neutral' gives N((r - sigma^2/2)*delta, sigma^2*delta);
    measure='physical' gives N((mu - sigma^2/2)*delta, sigma^2*delta).
    """
    if not (delta > 0.0):
        raise ConfigError("delta must be positive", delta=delta)
    if measure == "risk_neutral":
        drift = params.r - 0.5 * params.sigma ** 2
    elif measure == "physical":
        drift = params.mu - 0.5 * params.sigma ** 2
    else:
        raise ConfigError("measure must be 'risk_neutral' or 'physical'", measure=measure)
    return gaussian_model(drift, params.sigma, label=f"gaussian-{measure}")


def bgk_corrected_price(params: BsParams, strike: float, barrier: float,
                        monitoring_interval: float) -> float:
    """Continuous formula at the shifted barrier B*exp(beta*sigma*sqrt(dt)).

    Asymptotic correction for discrete monitoring of an up barrier; used as an
    independent cross-check of lattice prices.
    """
    if monitoring_interval < 0.0:
        raise ConfigError("monitoring_interval must be nonnegative",
                          monitoring_interval=monitoring_interval)
    shifted = barrier * math.exp(BGK_BETA * params.sigma * math.sqrt(monitoring_interval))
    return bs_uoc_continuous(params, strike, shifted)
