"""European put in closed form and the early-exercise premium by quadrature."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

from .model import (
    MarketModel,
    OptionContract,
    bond_price,
    forward_correlation,
    forward_rate,
    log_variance,
    rate_variance,
)
from .surface import BoundarySurface


class QuadratureError(RuntimeError):
    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class QuadratureConfig:
    """Quadrature resolution for the premium double integral.

    ``outer_nodes`` is the total budget of Gauss-Legendre points in time for
    a full [0, T] integral; it is spread over panels whose breakpoints are the
    surface's time nodes.  ``inner_nodes`` Gauss-Legendre points cover the
    Gaussian axis on [-inner_truncation, +inner_truncation].
    """

    outer_nodes: int = 64
    inner_nodes: int = 64
    inner_truncation: float = 8.0
    target_rel_tol: float = 1e-6
    max_outer_nodes: int = 1 << 14

    def __post_init__(self):
        if self.outer_nodes < 8:
            raise ValueError("outer_nodes must be >= 8")
        if self.inner_nodes < 16:
            raise ValueError("inner_nodes must be >= 16")
        if self.inner_truncation < 6:
            raise ValueError("inner_truncation must be >= 6")

    def doubled(self) -> "QuadratureConfig":
        return QuadratureConfig(
            outer_nodes=2 * self.outer_nodes,
            inner_nodes=2 * self.inner_nodes,
            inner_truncation=self.inner_truncation,
            target_rel_tol=self.target_rel_tol,
            max_outer_nodes=self.max_outer_nodes,
        )


@lru_cache(maxsize=64)
def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@lru_cache(maxsize=16)
def _inner_rule(n: int, half_width: float):
    x, w = _gl(n)
    y = half_width * x
    wy = half_width * w * np.exp(-0.5 * y * y) / np.sqrt(2 * np.pi)
    return y, wy


def european_put(model: MarketModel, contract: OptionContract, t, r, x):
    """P(t,T) K N(d1) - x N(d2); vectorised over (t, r, x)."""
    t, r, x = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (t, r, x)))
    T, K = contract.maturity, contract.strike
    if np.any(t > T) or np.any(t < 0):
        raise ValueError("t must lie in [0, T]")
    if np.any(x <= 0):
        raise ValueError("stock price must be > 0")
    dt = T - t
    P = bond_price(model.rates, t, r, T)
    g1 = log_variance(model, dt)
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = np.sqrt(g1)
        d1 = (np.log(K * P / x) + 0.5 * g1) / sq
        d2 = d1 - sq
        out = P * K * ndtr(d1) - x * ndtr(d2)
    out = np.where(g1 > 0, out, np.maximum(K * P - x, 0.0))
    return out[()] if out.ndim == 0 else out


def time_panels(t: float, T: float, breaks: np.ndarray, outer_nodes: int):
    """Outer nodes and weights on (t, T).

    Panels run between consecutive surface time nodes above t (the boundary
    is linear in time between them); a panel of width w gets
    max(3, ceil(outer_nodes * w / T)) Gauss-Legendre points.  The first panel
    is subdivided geometrically towards t and its innermost piece uses a
    quadratic map, since at the boundary the integrand behaves like
    sqrt(u - t).
    """
    b = np.asarray(breaks, dtype=float)
    tiny = 1e-9 * T
    b = b[(b > t + tiny) & (b < T - tiny)]
    edges = np.concatenate(([t], b, [T]))
    w0 = edges[1] - edges[0]
    inner = t + w0 * 4.0 ** -np.arange(_FIRST_PANEL_LEVELS, 0, -1)
    edges = np.concatenate(([t], inner, edges[1:]))
    us, ws = [], []
    for k, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        width = hi - lo
        p = max(3, int(np.ceil(outer_nodes * width / T)))
        x, w = _gl(p)
        s = 0.5 * (x + 1)
        if k == 0:
            us.append(lo + width * s**2)
            ws.append(width * s * w)
        else:
            us.append(lo + width * s)
            ws.append(0.5 * width * w)
    return np.concatenate(us), np.concatenate(ws)


_FIRST_PANEL_LEVELS = 4


def _phi_integrand(model, contract, t, r, x, u, y, surface):
    """Core vectorised integrand.

    r, x: shape (n,); u: (m,); y: (k,).  Returns (rate * N(phi)) with shape
    (n, m, k) together with P(t, u) of shape (n, m).
    """
    dt = u - t  # (m,)
    P = bond_price(model.rates, t, r[:, None], u[None, :])  # (n, m)
    q = forward_rate(model.rates, t, r[:, None], u[None, :])  # (n, m)
    g1 = log_variance(model, dt)  # (m,)
    g2 = rate_variance(model, dt)
    rt = forward_correlation(model, dt)
    rates = q[:, :, None] + np.sqrt(g2)[None, :, None] * y[None, None, :]
    b = surface(np.broadcast_to(u[None, :, None], rates.shape), rates)
    sd = np.sqrt((1 - rt**2) * g1)[None, :, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        logb = np.log(np.where(b > 0, b, 1.0))
        num = (
            np.log(P)[:, :, None]
            + logb
            - np.log(x)[:, None, None]
            + 0.5 * g1[None, :, None]
            - (np.sqrt(g1) * rt)[None, :, None] * y[None, None, :]
        )
        nphi = ndtr(num / sd)
    nphi = np.where(b > 0, nphi, 0.0)
    return rates * nphi, P


def premium_integrand(model, contract, t, u, y, boundary: BoundarySurface, r, x):
    """(q + y sqrt(gamma2)) N(phi) at a single (t, u, y) for state (r, x)."""
    if not u > t:
        raise ValueError("premium integrand requires u > t")
    if u > contract.maturity:
        raise ValueError("u beyond maturity")
    val, _ = _phi_integrand(
        model, contract, float(t), np.atleast_1d(float(r)), np.atleast_1d(float(x)),
        np.atleast_1d(float(u)), np.atleast_1d(float(y)), boundary,
    )
    return float(val[0, 0, 0])


def premium(model, contract, t, r, x, boundary: BoundarySurface, quad: QuadratureConfig | None = None):
    """Early-exercise premium v_p(t, r, x; b) for arrays r, x at a common t."""
    quad = quad or QuadratureConfig()
    r = np.atleast_1d(np.asarray(r, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    r, x = np.broadcast_arrays(r, x)
    scalar = r.size == 1 and np.ndim(r) <= 1
    T, K = contract.maturity, contract.strike
    if not 0 <= t <= T:
        raise ValueError("t must lie in [0, T]")
    if np.any(x < 0):
        raise ValueError("stock price must be >= 0")
    if t >= T:
        out = np.zeros_like(r)
        return float(out[0]) if scalar else out
    u, wu = time_panels(t, T, boundary.grid.t_nodes, quad.outer_nodes)
    if u.size > quad.max_outer_nodes:
        raise QuadratureError("outer node cap exceeded", estimate=None, error=None)
    y, wy = _inner_rule(quad.inner_nodes, quad.inner_truncation)
    out = np.empty(r.shape, dtype=float)
    flat_r, flat_x, flat_out = r.ravel(), x.ravel(), out.reshape(-1)
    chunk = max(1, 400_000 // (u.size * y.size))
    for s in range(0, flat_r.size, chunk):
        sl = slice(s, s + chunk)
        vals, P = _phi_integrand(model, contract, t, flat_r[sl], flat_x[sl], u, y, boundary)
        inner = vals @ wy  # (n, m)
        flat_out[sl] = K * (P * inner) @ wu
    return float(out.ravel()[0]) if scalar else out


def premium_adaptive(model, contract, t, r, x, boundary: BoundarySurface, quad: QuadratureConfig | None = None):
    """Premium with node doubling until successive estimates agree.

    Agreement means a change below target_rel_tol * max(value, 0.01 K).
    Returns (estimate, error).  Raises QuadratureError, carrying the last
    estimate and difference, once the outer node count would exceed the cap.
    """
    quad = quad or QuadratureConfig()
    K = contract.strike
    prev = premium(model, contract, t, r, x, boundary, quad)
    err = np.inf
    while True:
        nxt = quad.doubled()
        u, _ = time_panels(t, contract.maturity, boundary.grid.t_nodes, nxt.outer_nodes)
        if u.size > quad.max_outer_nodes:
            raise QuadratureError("premium did not converge within the node cap", estimate=prev, error=err)
        cur = premium(model, contract, t, r, x, boundary, nxt)
        err = np.max(np.abs(np.asarray(cur) - np.asarray(prev)))
        if err <= quad.target_rel_tol * max(np.max(np.abs(cur)), 0.01 * K):
            return cur, float(err)
        prev, quad = cur, nxt
