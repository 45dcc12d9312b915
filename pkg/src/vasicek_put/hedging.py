"""Discrete-time replication backtest of the American put.

The writer holds v_x shares, v_r / P_r bonds maturing at T and keeps the
rest in the money-market account.  While the state is in the stopping
region the position is short one share plus cash, and K r dt is withdrawn
as consumption.  Sensitivities come from a bicubic spline of the value
function tabulated once per rebalancing time on a (r, log x) grid.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .kernels import QuadratureConfig
from .model import bond_price, bond_price_dr, rate_moments
from .montecarlo import PathConfig, simulate_paths
from .pricer import _check_surface, value_components

TABLE_QUAD = QuadratureConfig(outer_nodes=32, inner_nodes=24)


@dataclass
class HedgeReport:
    rebalance_steps: int
    rms_replication_error: float
    mean_consumption: float
    max_shortfall: float
    mean_error: float
    per_step: dict = field(default_factory=dict)
    min_consumption_increment: float = 0.0
    continuation_consumption_max: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ValueSlice:
    """Spline of v(t, r, x) on one time slice; stopping region handled exactly."""

    t: float
    spline: RectBivariateSpline | None
    r_range: tuple
    logx_range: tuple

    def evaluate(self, surface, strike, r, x):
        """(v, v_x, v_r, stop) for arrays r, x."""
        b = surface(np.full(r.shape, self.t), r)
        stop = x <= b
        if self.spline is None:
            v = np.maximum(strike - x, 0.0)
            vx = np.where(x < strike, -1.0, 0.0)
            return v, vx, np.zeros_like(v), stop
        rc = np.clip(r, *self.r_range)
        lx = np.log(x)
        above = lx > self.logx_range[1]
        lc = np.clip(lx, *self.logx_range)
        v = self.spline.ev(rc, lc)
        vx = self.spline.ev(rc, lc, dy=1) / x
        vr = self.spline.ev(rc, lc, dx=1)
        v = np.where(above, 0.0, v)
        vx = np.where(above, 0.0, vx)
        vr = np.where(above, 0.0, vr)
        v = np.where(stop, strike - x, v)
        vx = np.where(stop, -1.0, vx)
        vr = np.where(stop, 0.0, vr)
        return v, vx, vr, stop


def value_slice(model, contract, surface, t, r0, n_r=9, n_x=41, quad=TABLE_QUAD) -> ValueSlice:
    """Tabulate v at time t over the rates a path started at r0 can plausibly reach."""
    T, K = contract.maturity, contract.strike
    if t >= T:
        return ValueSlice(t, None, (0.0, 0.0), (0.0, 0.0))
    mom = rate_moments(model.rates, r0, 0.0, t)
    half = max(5.0 * np.sqrt(mom.var_rate), 0.005)
    rs = np.linspace(mom.mean_rate - half, mom.mean_rate + half, n_r)
    b_low = float(np.min(surface(np.full(rs.shape, t), rs)))
    spread = model.sigma * np.sqrt(T - t)
    lo = np.log(max(b_low, 1e-3 * K)) - 0.5 * spread
    hi = np.log(K) + 6.0 * spread
    lxs = np.linspace(lo, hi, n_x)
    R, LX = np.meshgrid(rs, lxs, indexing="ij")
    X = np.exp(LX)
    V = K - X
    cont = X > surface(np.full(R.shape, t), R)
    if cont.any():
        ve, vp = value_components(model, contract, surface, t, R[cont], X[cont], quad)
        V[cont] = ve + vp
    spline = RectBivariateSpline(rs, lxs, V, kx=3, ky=3)
    return ValueSlice(t, spline, (rs[0], rs[-1]), (lo, hi))


def value_slices(model, contract, surface, times, r0, quad=TABLE_QUAD):
    return [value_slice(model, contract, surface, float(t), r0, quad=quad) for t in times]


def _run(model, contract, surface, paths, stride, slices, v0):
    """Rebalance on every ``stride``-th simulation step."""
    T, K = contract.maturity, contract.strike
    times = paths.times
    n = paths.r.shape[0]
    idx = np.arange(0, times.size, stride)
    if idx[-1] != times.size - 1:
        raise ValueError("rebalance stride must divide the number of steps")
    port = np.full(n, v0)
    consumption = np.zeros(n)
    min_inc = np.inf
    cont_max = 0.0
    err_mean, err_rms = [], []
    exercised = np.zeros(n, dtype=bool)
    shortfall = np.zeros(n)
    for a, b in zip(idx[:-1], idx[1:]):
        t, h = times[a], times[b] - times[a]
        r, x, I = paths.r[:, a], paths.x[:, a], paths.int_r[:, a]
        v, vx, vr, stop = slices[a].evaluate(surface, K, r, x)
        e = np.exp(-I) * (port - v)
        err_mean.append(float(e.mean()))
        err_rms.append(float(np.sqrt(np.mean(e**2))))
        first = stop & ~exercised
        shortfall[first] = np.exp(-I[first]) * ((K - x[first]) - port[first])
        exercised |= stop
        P = bond_price(model.rates, t, r, T)
        Pr = bond_price_dr(model.rates, t, r, T)
        phi2 = np.where(np.abs(Pr) > 1e-12, vr / np.where(np.abs(Pr) > 1e-12, Pr, 1.0), 0.0)
        cash = port - vx * x - phi2 * P
        r1, x1 = paths.r[:, b], paths.x[:, b]
        growth = np.exp(paths.int_r[:, b] - I)
        P1 = bond_price(model.rates, times[b], r1, T)
        inc = np.where(stop, K * r * h, 0.0)
        min_inc = min(min_inc, float(inc.min()))
        cont_max = max(cont_max, float(np.abs(inc[~stop]).max()) if (~stop).any() else 0.0)
        consumption += inc
        port = vx * x1 + phi2 * P1 + cash * growth - inc
    payoff = np.maximum(K - paths.x[:, -1], 0.0)
    disc = np.exp(-paths.int_r[:, -1])
    err = disc * (port - payoff)
    late = ~exercised
    shortfall[late] = disc[late] * (payoff[late] - port[late])
    err_mean.append(float(err.mean()))
    err_rms.append(float(np.sqrt(np.mean(err**2))))
    return HedgeReport(
        rebalance_steps=idx.size - 1,
        rms_replication_error=float(np.sqrt(np.mean(err**2))),
        mean_consumption=float(consumption.mean()),
        max_shortfall=float(max(shortfall.max(), 0.0)),
        mean_error=float(err.mean()),
        per_step={"t": times[idx].tolist(), "mean_error": err_mean, "rms_error": err_rms},
        min_consumption_increment=float(min_inc),
        continuation_consumption_max=float(cont_max),
    )


def hedge_backtest(model, contract, surface, r0, x0, cfg: PathConfig, rebalance_steps=(50, 100, 200),
                   v0=None, quad=TABLE_QUAD):
    """Backtest at each rebalancing frequency (per unit time) on common paths.

    Paths are simulated on the finest frequency; coarser frequencies must
    divide it and rebalance on a subset of the same times.
    """
    _check_surface(surface)
    T = contract.maturity
    freqs = sorted(set(int(s) for s in np.atleast_1d(rebalance_steps)))
    finest = freqs[-1]
    if any(finest % f for f in freqs):
        raise ValueError("rebalancing frequencies must divide the finest one")
    n_int = int(round(finest * T))
    paths = simulate_paths(model, r0, x0, T, PathConfig(cfg.n_paths, finest, cfg.seed, cfg.antithetic,
                                                        cfg.block_size), n_intervals=n_int, stream=3)
    slices = value_slices(model, contract, surface, paths.times, r0, quad)
    if v0 is None:
        ve, vp = value_components(model, contract, surface, 0.0, r0, x0)
        v0 = float(ve[0] + vp[0])
        if x0 <= float(surface(0.0, r0)):
            v0 = contract.strike - x0
    return [_run(model, contract, surface, paths, finest // f, slices, v0) for f in freqs]
