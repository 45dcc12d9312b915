"""Model parameters and closed-form Vasicek quantities.

The short rate follows dr = kappa (theta - r) dt + beta dW and the stock
dX = r X dt + sigma X dB with d<W, B> = rho dt.  Everything here is a pure
function of its arguments and accepts numpy arrays where that makes sense.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class VasicekParams:
    kappa: float
    theta: float
    beta: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")


@dataclass(frozen=True)
class MarketModel:
    rates: VasicekParams
    sigma: float
    rho: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not -1 < self.rho < 1:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")

    @classmethod
    def default(cls) -> "MarketModel":
        """Reference parameter set used throughout the test-suite and CLI."""
        return cls(VasicekParams(kappa=0.3, theta=0.05, beta=0.01), sigma=0.4, rho=0.5)


@dataclass(frozen=True)
class OptionContract:
    strike: float
    maturity: float

    def __post_init__(self):
        if not self.strike > 0:
            raise ValueError(f"strike must be > 0, got {self.strike}")
        if not self.maturity > 0:
            raise ValueError(f"maturity must be > 0, got {self.maturity}")

    @classmethod
    def default(cls) -> "OptionContract":
        return cls(strike=100.0, maturity=1.0)


def g(a, u):
    """(1 - exp(-a u)) / a, with the a -> 0 limit u."""
    a = np.asarray(a, dtype=float)
    u = np.asarray(u, dtype=float)
    au = a * u
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(a == 0, u, -np.expm1(-au) / np.where(a == 0, 1.0, a))
    return out[()] if out.ndim == 0 else out


def _horizon(t, s):
    dt = np.asarray(s, dtype=float) - np.asarray(t, dtype=float)
    if np.any(dt < 0):
        raise ValueError("horizon end precedes start (s < t)")
    return dt


def mean_integral(params: VasicekParams, r, t, s):
    """E[int_t^s r_u du | r_t = r]."""
    dt = _horizon(t, s)
    gk = g(params.kappa, dt)
    return r * gk + params.theta * (dt - gk)


_SERIES_TERMS = 24


def _int_g_squared(k, dt):
    # int_0^dt g(k, v)^2 dv = (dt - 2 g(k, dt) + g(2k, dt)) / k^2; the closed form
    # cancels badly for small k*dt, so use the power series there.
    dt = np.asarray(dt, dtype=float)
    x = k * dt
    series = np.zeros_like(dt)
    fact = 1.0
    for n in range(1, _SERIES_TERMS):
        fact *= n
        if n >= 2:
            series = series + (-1) ** n * (2.0**n - 2) * x ** (n - 2) / ((n + 1) * fact)
    series = series * dt**3
    with np.errstate(invalid="ignore", divide="ignore"):
        closed = (dt - 2 * g(k, dt) + g(2 * k, dt)) / k**2
    out = np.where(x < 0.5, series, closed)
    return out[()] if out.ndim == 0 else out


def _int_g(k, dt):
    # int_0^dt g(k, v) dv = (dt - g(k, dt)) / k, series branch as above
    dt = np.asarray(dt, dtype=float)
    x = k * dt
    series = np.zeros_like(dt)
    fact = 1.0
    for n in range(1, _SERIES_TERMS):
        fact *= n
        series = series + (-1) ** (n + 1) * x ** (n - 1) / ((n + 1) * fact)
    series = series * dt**2
    with np.errstate(invalid="ignore", divide="ignore"):
        closed = (dt - g(k, dt)) / k
    out = np.where(x < 0.5, series, closed)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class RateMoments:
    mean_rate: np.ndarray | float
    var_rate: np.ndarray | float
    mean_int: np.ndarray | float
    var_int: np.ndarray | float
    cov_int_rate: np.ndarray | float


def rate_moments(params: VasicekParams, r, t, s) -> RateMoments:
    """Conditional Gaussian moments of (r_s, int_t^s r) given r_t = r."""
    dt = _horizon(t, s)
    k, b = params.kappa, params.beta
    decay = np.exp(-k * dt)
    return RateMoments(
        mean_rate=r * decay + params.theta * (1 - decay),
        var_rate=b**2 * g(2 * k, dt),
        mean_int=mean_integral(params, r, t, s),
        var_int=b**2 * _int_g_squared(k, dt),
        cov_int_rate=0.5 * b**2 * g(k, dt) ** 2,
    )


def bond_price(params: VasicekParams, t, r, T):
    """Zero-coupon bond price P(t, T) given r_t = r."""
    dt = _horizon(t, T)
    mu = mean_integral(params, r, t, T)
    return np.exp(-mu + 0.5 * params.beta**2 * _int_g_squared(params.kappa, dt))


def bond_price_dr(params: VasicekParams, t, r, T):
    """dP/dr, which is -g(kappa, T - t) P."""
    dt = _horizon(t, T)
    return -g(params.kappa, dt) * bond_price(params, t, r, T)


def forward_rate(params: VasicekParams, t, r, u):
    """q(t, u): mean of r_u under the u-forward measure; also -d log P(t,u)/du."""
    dt = _horizon(t, u)
    k = params.kappa
    decay = np.exp(-k * dt)
    return r * decay + params.theta * (1 - decay) - 0.5 * params.beta**2 * g(k, dt) ** 2


def log_variance(model: MarketModel, dt):
    """gamma_1: variance of log X_u under the u-forward measure."""
    p = model.rates
    k, b, s = p.kappa, p.beta, model.sigma
    return dt * s**2 + 2 * model.rho * s * b * _int_g(k, dt) + b**2 * _int_g_squared(k, dt)


def rate_variance(model: MarketModel, dt):
    """gamma_2: variance of r_u under the u-forward measure."""
    return model.rates.beta**2 * g(2 * model.rates.kappa, dt)


def rate_log_cov(model: MarketModel, dt):
    """Covariance between log X_u and r_u under the u-forward measure."""
    p = model.rates
    gk = g(p.kappa, dt)
    return model.rho * model.sigma * p.beta * gk + 0.5 * p.beta**2 * gk**2


def forward_correlation(model: MarketModel, dt):
    """rho_tilde, or 0 where either variance vanishes."""
    g1 = log_variance(model, dt)
    g2 = rate_variance(model, dt)
    denom = np.sqrt(g1 * g2)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(denom > 0, rate_log_cov(model, dt) / np.where(denom > 0, denom, 1.0), 0.0)
    out = np.clip(out, -1.0, 1.0)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class PricingInputs:
    d1: float
    d2: float
    q: float
    mu: float
    gamma1: float
    gamma2: float
    rho_tilde: float
    L: float
    degenerate: bool = False


def pricing_inputs(model: MarketModel, contract: OptionContract, t, u, r, x) -> PricingInputs:
    """All auxiliary quantities for horizon u seen from (t, r, x).

    At u == t the forward-measure quantities collapse; rho_tilde is then
    reported as 0 and ``degenerate`` is set.  d1/d2 are +-inf there.
    """
    if x <= 0:
        raise ValueError(f"stock price must be > 0, got {x}")
    if u > contract.maturity:
        raise ValueError("horizon beyond maturity")
    dt = float(_horizon(t, u))
    p = model.rates
    P = float(bond_price(p, t, r, u))
    g1 = float(log_variance(model, dt))
    g2 = float(rate_variance(model, dt))
    mu = float(mean_integral(p, r, t, u))
    q = float(forward_rate(p, t, r, u))
    L = -np.log(P) - 0.5 * g1
    degenerate = g1 <= 0.0 or g2 <= 0.0
    rho_t = float(forward_correlation(model, dt))
    if g1 > 0:
        sq = np.sqrt(g1)
        d1 = (np.log(contract.strike * P / x) + 0.5 * g1) / sq
        d2 = d1 - sq
    else:
        m = np.log(contract.strike * P / x)
        d1 = d2 = np.inf if m > 0 else -np.inf
    return PricingInputs(
        d1=float(d1), d2=float(d2), q=q, mu=mu, gamma1=g1, gamma2=g2,
        rho_tilde=rho_t, L=float(L), degenerate=bool(degenerate),
    )
