"""Market model calibration: empirical Levy densities and cumulant functions.

Raw high-frequency log returns are binned into a piecewise-linear jump density
(one jump per sampling interval on average), rescaled to a target annualized
volatility, and exposed through a cumulant function

    kappa(u) = mu*u + 0.5*gvar*u^2 + integral (e^{ux} - 1 - ux) f(x) dx

whose integral term is evaluated segment-exactly on the piecewise-linear
density: a global-moment Taylor series for small |u| and a telescoped knot sum
elsewhere. Synthetic backends (Gaussian, jump diffusion, double-exponential
jumps) expose the same interface so every downstream consumer is agnostic to
where the model came from.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, DegenerateMeasureError, DegenerateSampleError

# Taylor branch of the exp-integral is used while |u| * x_max <= this bound;
# with moments precomputed to order 60 the series tail is < 1e-50 there.
_TAYLOR_RADIUS = 3.0
_MAX_MOMENT = 60


# ==== samples ====


@dataclass(frozen=True)
class ReturnSample:
    """Log returns observed once per ``sample_interval`` (in years)."""

    values: np.ndarray
    sample_interval: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.size == 0:
            raise DegenerateSampleError("empty return sample")
        if not np.all(np.isfinite(values)):
            raise DegenerateSampleError("non-finite values in return sample")
        if not (self.sample_interval > 0.0):
            raise ConfigError("sample_interval must be positive",
                              sample_interval=self.sample_interval)


def load_returns(path: str, sample_interval: float) -> ReturnSample:
    """Read a returns file: one log return per line, or timestamp,price rows.

    Two-column input is converted to log returns of consecutive prices; the
    stream is treated as homogeneous (no session/overnight special-casing).
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_returns(text, sample_interval)


def parse_returns(text: str, sample_interval: float) -> ReturnSample:
    rows = [row for row in csv.reader(io.StringIO(text)) if row and any(c.strip() for c in row)]
    if not rows:
        raise DegenerateSampleError("no data rows in returns input")
    width = len(rows[0])
    if width == 1:
        vals = np.array([float(r[0]) for r in rows], dtype=float)
        return ReturnSample(vals, sample_interval)
    if width == 2:
        stamped = []
        for r in rows:
            ts = datetime.fromisoformat(r[0].strip())
            px = float(r[1])
            if px <= 0.0:
                raise ConfigError("non-positive price in returns input", price=px)
            stamped.append((ts, px))
        stamped.sort(key=lambda t: t[0])
        prices = np.array([p for _, p in stamped], dtype=float)
        if prices.size < 2:
            raise DegenerateSampleError("need at least two prices to form returns")
        return ReturnSample(np.diff(np.log(prices)), sample_interval)
    raise ConfigError("returns input must have 1 or 2 columns", columns=width)


# ==== piecewise-linear Levy density ====


@dataclass(frozen=True)
class LevyDensity:
    """Nonnegative piecewise-linear density on an equidistant grid.

    ``density[k]`` is the value at knot ``m0 + k*spacing``; the first and last
    knots carry zero and the density vanishes outside the grid. Values are an
    annualized jump intensity per unit of log return.
    """

    m0: float
    spacing: float
    density: np.ndarray

    def __post_init__(self):
        dens = np.asarray(self.density, dtype=float)
        object.__setattr__(self, "density", dens)
        if dens.ndim != 1 or dens.size < 3:
            raise ConfigError("density needs at least 3 knots", knots=dens.size)
        if not (self.spacing > 0.0):
            raise ConfigError("grid spacing must be positive", spacing=self.spacing)
        if dens[0] != 0.0 or dens[-1] != 0.0:
            raise ConfigError("density must vanish at the outer knots")
        if np.any(dens < 0.0) or not np.all(np.isfinite(dens)):
            raise ConfigError("density must be finite and nonnegative")

    @property
    def grid(self) -> np.ndarray:
        return self.m0 + self.spacing * np.arange(self.density.size)

    @property
    def x_max(self) -> float:
        g = self.grid
        return max(abs(g[0]), abs(g[-1]))

    # -- exact segment integrals --

    def moments(self, k_max: int) -> np.ndarray:
        """Exact integrals M_k = integral x^k f(x) dx for k = 0..k_max."""
        x = self.grid
        f = self.density
        slopes = np.diff(f) / self.spacing
        # powers[p] = x**p, built multiplicatively
        powers = np.ones((k_max + 3, x.size))
        for p in range(1, k_max + 3):
            powers[p] = powers[p - 1] * x
        out = np.empty(k_max + 1)
        for k in range(k_max + 1):
            ip1 = np.diff(powers[k + 1]) / (k + 1)  # integral of x^k over segment
            ip2 = np.diff(powers[k + 2]) / (k + 2)  # integral of x^{k+1}
            out[k] = np.sum(f[:-1] * ip1 + slopes * (ip2 - x[:-1] * ip1))
        return out

    def moment(self, k: int) -> float:
        return float(self.moments(k)[k])

    def slope_jumps(self) -> np.ndarray:
        """Second-derivative point masses J_k at each knot (first slope, slope
        differences, minus last slope); integration by parts reduces
        integral e^{ux} f dx to sum J_k e^{u m_k} / u^2."""
        slopes = np.diff(self.density) / self.spacing
        j = np.empty(self.density.size)
        j[0] = slopes[0]
        j[1:-1] = np.diff(slopes)
        j[-1] = -slopes[-1]
        return j

    def scaled(self, factor: float) -> "LevyDensity":
        """Pushforward through x -> factor*x (densities pick up 1/factor)."""
        if not (factor > 0.0):
            raise ConfigError("scale factor must be positive", factor=factor)
        return LevyDensity(self.m0 * factor, self.spacing * factor, self.density / factor)

    def to_dict(self) -> dict:
        return {"m0": self.m0, "spacing": self.spacing, "density": self.density.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "LevyDensity":
        return cls(float(d["m0"]), float(d["spacing"]), np.array(d["density"], dtype=float))


# ==== market parameters ====


@dataclass(frozen=True)
class MarketParams:
    """Annualized drift/volatility/rate plus the trading calendar."""

    mu: float
    sigma: float
    r: float
    delta: float
    hours_per_day: int = 8
    days_per_year: int = 250

    def __post_init__(self):
        if not (self.sigma > 0.0):
            raise ConfigError("sigma must be positive", sigma=self.sigma)
        if not (self.delta > 0.0):
            raise ConfigError("delta must be positive", delta=self.delta)
        if self.hours_per_day <= 0 or self.days_per_year <= 0:
            raise ConfigError("calendar entries must be positive integers")

    @property
    def gross_rate(self) -> float:
        """Per-period growth R = e^{r*delta}."""
        return math.exp(self.r * self.delta)

    @property
    def day(self) -> float:
        """One trading day in years."""
        return 1.0 / self.days_per_year


# ==== cumulant function ====


@dataclass(frozen=True)
class PeriodMoments:
    mean: float
    variance: float
    skewness: float
    kurtosis: float

    def astuple(self) -> tuple:
        return (self.mean, self.variance, self.skewness, self.kurtosis)


@dataclass(frozen=True)
class CumulantFunction:
    """Cumulant function of an infinitely divisible log-return model.

    E[e^{u Z_delta}] = e^{delta * kappa(u)} with
    kappa(u) = mu*u + gaussian_variance*u^2/2 + integral (e^{ux}-1-ux) f dx,
    so kappa'(0) = mu is the annualized mean log return.
    """

    mu: float
    gaussian_variance: float = 0.0
    measure: Optional[LevyDensity] = None
    label: str = "model"
    _mom: np.ndarray = field(init=False, repr=False, compare=False)
    _jumps: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.gaussian_variance < 0.0:
            raise ConfigError("gaussian_variance must be nonnegative",
                              gaussian_variance=self.gaussian_variance)
        if self.measure is not None:
            mom = self.measure.moments(_MAX_MOMENT)
            jumps = self.measure.slope_jumps()
        else:
            mom = np.zeros(_MAX_MOMENT + 1)
            jumps = np.zeros(0)
        object.__setattr__(self, "_mom", mom)
        object.__setattr__(self, "_jumps", jumps)

    # -- evaluation --

    def _jump_integral(self, u: np.ndarray) -> np.ndarray:
        """integral (e^{ux} - 1 - ux) f(x) dx, exact per linear segment."""
        if self.measure is None:
            return np.zeros_like(u)
        out = np.zeros_like(u)
        absu = np.abs(u)
        small = absu * self.measure.x_max <= _TAYLOR_RADIUS
        if np.any(small):
            us = u[small]
            # sum_{k>=2} M_k u^k / k!  via Horner from the top order down
            acc = np.zeros_like(us)
            for k in range(_MAX_MOMENT, 1, -1):
                acc = (acc + self._mom[k] / math.factorial(k)) * us
            out[small] = acc * us
        if np.any(~small):
            ub = u[~small]
            m = self.measure.grid
            # sum J_k e^{u m_k}, chunked to bound the (n_u x n_knots) workspace
            s = np.empty_like(ub)
            for lo in range(0, ub.size, 2048):
                chunk = ub[lo:lo + 2048, None]
                s[lo:lo + 2048] = np.exp(chunk * m[None, :]) @ self._jumps
            out[~small] = s / (ub * ub) - self._mom[0] - ub * self._mom[1]
        return out

    def kappa(self, u) -> np.ndarray | complex | float:
        """Evaluate kappa at real or complex u (scalar or array)."""
        uu = np.atleast_1d(np.asarray(u, dtype=complex))
        val = self.mu * uu + 0.5 * self.gaussian_variance * uu * uu + self._jump_integral(uu)
        if np.isrealobj(np.asarray(u)):
            val = val.real
        if np.isscalar(u) or np.asarray(u).ndim == 0:
            return val[0]
        return val

    def kappa_prime(self, u) -> np.ndarray | complex | float:
        """Analytic derivative of kappa; kappa_prime(0) == mu by construction."""
        uu = np.atleast_1d(np.asarray(u, dtype=complex))
        val = self.mu + self.gaussian_variance * uu
        if self.measure is not None:
            absu = np.abs(uu)
            small = absu * self.measure.x_max <= _TAYLOR_RADIUS
            jd = np.zeros_like(uu)
            if np.any(small):
                us = uu[small]
                acc = np.zeros_like(us)
                for k in range(_MAX_MOMENT, 1, -1):
                    acc = (acc + self._mom[k] / math.factorial(k - 1)) * us
                jd[small] = acc
            if np.any(~small):
                ub = uu[~small]
                m = self.measure.grid
                s = np.empty_like(ub)
                sm = np.empty_like(ub)
                for lo in range(0, ub.size, 2048):
                    e = np.exp(ub[lo:lo + 2048, None] * m[None, :])
                    s[lo:lo + 2048] = e @ self._jumps
                    sm[lo:lo + 2048] = e @ (self._jumps * m)
                jd[~small] = sm / (ub * ub) - 2.0 * s / (ub ** 3) - self._mom[1]
            val = val + jd
        if np.isrealobj(np.asarray(u)):
            val = val.real
        if np.isscalar(u) or np.asarray(u).ndim == 0:
            return val[0]
        return val

    # -- cumulants and moments --

    def period_mean(self, delta: float) -> float:
        return self.mu * delta

    def period_variance(self, delta: float) -> float:
        return (self.gaussian_variance + self._mom[2]) * delta

    def cumulants(self, delta: float) -> PeriodMoments:
        """Moments of the period-delta log return from exact cumulants."""
        if not (delta > 0.0):
            raise ConfigError("delta must be positive", delta=delta)
        k1 = self.mu * delta
        k2 = (self.gaussian_variance + self._mom[2]) * delta
        k3 = self._mom[3] * delta
        k4 = self._mom[4] * delta
        if k2 <= 0.0:
            raise DegenerateMeasureError("model has zero period variance")
        return PeriodMoments(k1, k2, k3 / k2 ** 1.5, 3.0 + k4 / (k2 * k2))

    def level_moments(self, delta: float) -> PeriodMoments:
        """Moments of the price relative e^{Z_delta} via kappa at u = 1..4."""
        e = [math.exp(delta * float(np.real(self.kappa(float(k))))) for k in range(1, 5)]
        mean = e[0]
        var = e[1] - mean ** 2
        mu3 = e[2] - 3.0 * e[1] * mean + 2.0 * mean ** 3
        mu4 = e[3] - 4.0 * e[2] * mean + 6.0 * e[1] * mean ** 2 - 3.0 * mean ** 4
        return PeriodMoments(mean, var, mu3 / var ** 1.5, mu4 / (var * var))

    # -- closed-form law, available only for the pure Gaussian case --

    def exact_cdf(self, delta: float) -> Optional[Callable[[np.ndarray], np.ndarray]]:
        if self.measure is not None:
            return None
        m = self.mu * delta
        s = math.sqrt(self.gaussian_variance * delta)
        if s == 0.0:
            return None
        return lambda z: ndtr((np.asarray(z, dtype=float) - m) / s)

    # -- quantities used by the inversion's truncation envelope --

    def envelope_terms(self, c: float) -> dict:
        """Bounds on Re kappa(i*lam - c): exp-weighted mass, slope-jump sum."""
        if self.measure is None:
            return {"m0": 0.0, "m1": 0.0, "exp_mass": 0.0, "jump_budget": 0.0}
        m = self.measure.grid
        w = np.exp(-c * m)
        exp_mass = float(np.dot(self._jumps, w) / (c * c)) if c != 0.0 else float("inf")
        return {
            "m0": float(self._mom[0]),
            "m1": float(self._mom[1]),
            "exp_mass": exp_mass,
            "jump_budget": float(np.dot(np.abs(self._jumps), w)),
        }

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "gaussian_variance": self.gaussian_variance,
            "measure": self.measure.to_dict() if self.measure is not None else None,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CumulantFunction":
        meas = LevyDensity.from_dict(d["measure"]) if d.get("measure") else None
        return cls(float(d["mu"]), float(d.get("gaussian_variance", 0.0)), meas,
                   str(d.get("label", "model")))


def save_model(cf: CumulantFunction, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cf.to_dict(), fh)


def load_model(path: str) -> CumulantFunction:
    with open(path, "r", encoding="utf-8") as fh:
        return CumulantFunction.from_dict(json.load(fh))


# ==== operations ====


def build_raw_levy(sample: ReturnSample, n_interior: int = 1000) -> LevyDensity:
    """Bin a return sample into a piecewise-linear jump density.

    Interior knots m_1..m_N run from the sample minimum to the maximum; each
    knot carries the histogram density (relative bin frequency / bin width) of
    the bin centred on it, divided by the sampling interval, so the measure
    fires one jump per sampling period on average.
    """
    if n_interior < 2:
        raise ConfigError("need at least 2 interior knots", n_interior=n_interior)
    x = sample.values
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi <= lo:
        raise DegenerateSampleError("all returns identical", value=lo)
    spacing = (hi - lo) / (n_interior - 1)
    idx = np.floor((x - lo) / spacing + 0.5).astype(np.int64)
    idx = np.clip(idx, 0, n_interior - 1)
    counts = np.bincount(idx, minlength=n_interior).astype(float)
    dens = np.zeros(n_interior + 2)
    dens[1:-1] = counts / (x.size * spacing * sample.sample_interval)
    return LevyDensity(lo - spacing, spacing, dens)


def rescale(raw: LevyDensity, sigma: float) -> LevyDensity:
    """Scale the measure's support so its annualized variance is sigma^2."""
    if not (sigma > 0.0):
        raise ConfigError("sigma must be positive", sigma=sigma)
    var_raw = raw.moment(2)
    if var_raw <= 0.0:
        raise DegenerateMeasureError("raw measure has zero second moment")
    return raw.scaled(sigma / math.sqrt(var_raw))


def annualized_moments(kappa: CumulantFunction, delta: float) -> tuple:
    """(mean, variance, skewness, kurtosis) of the period-delta log return."""
    return kappa.cumulants(delta).astuple()


# ==== synthetic model backends ====


def gaussian_model(mean_log_return: float, sigma: float, label: str = "gaussian") -> CumulantFunction:
    """Brownian model with kappa'(0) = mean_log_return and variance sigma^2."""
    if not (sigma > 0.0):
        raise ConfigError("sigma must be positive", sigma=sigma)
    return CumulantFunction(mean_log_return, sigma * sigma, None, label)


def _shape_density(pdf: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                   n_interior: int) -> LevyDensity:
    spacing = (hi - lo) / (n_interior - 1)
    knots = lo - spacing + spacing * np.arange(n_interior + 2)
    dens = pdf(knots)
    dens[0] = 0.0
    dens[-1] = 0.0
    return LevyDensity(knots[0], spacing, np.maximum(dens, 0.0))


def jump_diffusion_model(mean_log_return: float, sigma: float, jump_std: float = 0.01,
                         jump_mean: float = 0.0, daily_excess_kurtosis: float = 0.72,
                         days_per_year: int = 250, n_interior: int = 121,
                         label: str = "jump-diffusion") -> CumulantFunction:
    """Brownian motion plus normal-shaped compound Poisson jumps.

    The jump intensity is solved so the 1-day log return has excess kurtosis
    exactly ``daily_excess_kurtosis`` (computed from the discretized jump
    shape, so the target is exact for the model as used); the Brownian
    variance tops total annualized variance up to sigma^2.
    """
    if not (jump_std > 0.0):
        raise ConfigError("jump_std must be positive", jump_std=jump_std)
    if not (daily_excess_kurtosis > 0.0):
        raise ConfigError("daily_excess_kurtosis must be positive",
                          daily_excess_kurtosis=daily_excess_kurtosis)
    norm = 1.0 / (jump_std * math.sqrt(2.0 * math.pi))
    shape = _shape_density(
        lambda x: norm * np.exp(-0.5 * ((x - jump_mean) / jump_std) ** 2),
        jump_mean - 6.0 * jump_std, jump_mean + 6.0 * jump_std, n_interior)
    m = shape.moments(4)
    target_m4 = daily_excess_kurtosis * (sigma ** 4) / days_per_year
    intensity = target_m4 / m[4]
    gvar = sigma * sigma - intensity * m[2]
    if gvar <= 0.0:
        raise ConfigError("jump parameters exceed the total variance budget",
                          jump_variance=intensity * m[2], total=sigma * sigma)
    dens = LevyDensity(shape.m0, shape.spacing, shape.density * intensity)
    return CumulantFunction(mean_log_return, gvar, dens, label)


def double_exponential_model(mean_log_return: float, sigma: float, intensity: float,
                             jump_scale: float, n_interior: int = 801,
                             support_scale: float = 40.0,
                             label: str = "double-exponential") -> CumulantFunction:
    """Brownian motion plus double-exponential (Laplace) jumps.

    The Laplace density is truncated at ``support_scale`` scales (relative
    tail mass ~ e^-40) and carried on the same piecewise-linear grid as the
    empirical route.
    """
    if not (intensity > 0.0 and jump_scale > 0.0):
        raise ConfigError("intensity and jump_scale must be positive",
                          intensity=intensity, jump_scale=jump_scale)
    half = support_scale * jump_scale
    shape = _shape_density(
        lambda x: np.exp(-np.abs(x) / jump_scale) / (2.0 * jump_scale),
        -half, half, n_interior)
    m2 = shape.moment(2)
    gvar = sigma * sigma - intensity * m2
    if gvar <= 0.0:
        raise ConfigError("jump parameters exceed the total variance budget",
                          jump_variance=intensity * m2, total=sigma * sigma)
    dens = LevyDensity(shape.m0, shape.spacing, shape.density * intensity)
    return CumulantFunction(mean_log_return, gvar, dens, label)
