"""Risk-loaded quotes on top of the hedging engine's (value, risk) pairs.

A seller who demands a Sharpe ratio h on the unhedgeable part quotes
    price = value + e^(-r*T) * h * sqrt(T) * risk,
i.e. the fair hedging capital plus a loading proportional to the residual
standard deviation.  The premium ratio sqrt(T) * risk / value expresses the
loading per unit of Sharpe ratio relative to the fair value itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, EngineError


@dataclass(frozen=True)
class SharpeQuote:
    value: float
    eps: float
    sharpe: float
    maturity: float
    rate: float
    price: float
    loading: float          # price - value


def sharpe_price(value: float, eps: float, sharpe: float, maturity: float,
                 rate: float = 0.0) -> SharpeQuote:
    """Quote = value + e^(-r*T) * sharpe * sqrt(T) * eps, with a restore check."""
    if not (maturity > 0.0):
        raise ConfigError("maturity must be positive", maturity=maturity)
    if eps < 0.0:
        raise ConfigError("eps must be nonnegative", eps=eps)
    loading = math.exp(-rate * maturity) * sharpe * math.sqrt(maturity) * eps
    price = value + loading
    if eps > 0.0:
        implied = math.exp(rate * maturity) * (price - value) / eps
        target = sharpe * math.sqrt(maturity)
        if abs(implied - target) > 1e-12 * max(1.0, abs(target)):
            raise EngineError("round-trip of the quoted loading failed",
                              implied=implied, target=target)
    return SharpeQuote(value=value, eps=eps, sharpe=sharpe, maturity=maturity,
                       rate=rate, price=price, loading=loading)


def premium_ratio(value: float, eps: float, maturity: float) -> float | None:
    """sqrt(T) * eps / value; None when the value is zero (empty cell)."""
    if not (maturity > 0.0):
        raise ConfigError("maturity must be positive", maturity=maturity)
    if value == 0.0:
        return None
    return math.sqrt(maturity) * eps / value
