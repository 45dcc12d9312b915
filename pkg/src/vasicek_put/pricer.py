"""American put value through the European-plus-premium decomposition."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .kernels import QuadratureConfig, european_put, premium
from .model import MarketModel, OptionContract
from .surface import BoundarySurface


class UnconvergedSurfaceError(ValueError):
    """Raised when pricing is attempted with a surface that did not converge."""


@dataclass(frozen=True)
class PricingResult:
    value: float
    european: float
    premium: float
    exercise_now: bool
    boundary_at_point: float

    def to_dict(self) -> dict:
        return asdict(self)


def _check_surface(surface: BoundarySurface):
    if not surface.converged:
        raise UnconvergedSurfaceError("surface is not converged; run the boundary solver first")


def exercise_decision(surface: BoundarySurface, t, r, x, maturity=None) -> bool:
    """True (stop) iff x <= b(t, r); always stop at maturity."""
    if x <= 0:
        raise ValueError("stock price must be > 0")
    T = surface.grid.maturity if maturity is None else maturity
    if t >= T:
        return True
    return bool(x <= float(surface(t, r)))


def value_components(model, contract, surface, t, r, x, quad=None):
    """Vectorised (european, premium) at a common time t for arrays r, x.

    In the stopping region x <= b(t, r) the value is K - x exactly and the
    premium is reported as K - x minus the European value; the quadrature
    premium is only evaluated in the continuation region.
    """
    r, x = np.broadcast_arrays(np.atleast_1d(np.asarray(r, float)), np.atleast_1d(np.asarray(x, float)))
    r, x = r.copy(), x.copy()
    T, K = contract.maturity, contract.strike
    if t >= T:
        return np.maximum(K - x, 0.0), np.zeros(r.shape)
    ve = np.asarray(european_put(model, contract, t, r, x), float).reshape(r.shape)
    stop = x <= surface(np.full(r.shape, t), r)
    vp = K - x - ve
    cont = ~stop
    if cont.any():
        vp[cont] = premium(model, contract, t, r[cont], x[cont], surface, quad)
    return ve, vp


def values(model, contract, surface, t, r, x, quad=None):
    """American values at a common time t; arrays r and x broadcast."""
    _check_surface(surface)
    ve, vp = value_components(model, contract, surface, t, r, x, quad)
    return ve + vp


def price(
    model: MarketModel,
    contract: OptionContract,
    surface: BoundarySurface,
    t: float,
    r: float,
    x: float,
    quad: QuadratureConfig | None = None,
) -> PricingResult:
    _check_surface(surface)
    T, K = contract.maturity, contract.strike
    if not 0 <= t <= T:
        raise ValueError("t must lie in [0, T]")
    if not x > 0:
        raise ValueError("stock price must be > 0")
    b = float(surface(min(t, surface.grid.t_nodes[-1]), r))
    if t >= T:
        payoff = max(K - x, 0.0)
        return PricingResult(payoff, payoff, 0.0, True, b)
    ve, vp = value_components(model, contract, surface, t, r, x, quad)
    ve, vp = float(ve[0]), float(vp[0])
    return PricingResult(ve + vp, ve, vp, exercise_decision(surface, t, r, x, T), b)


@dataclass(frozen=True)
class Greeks:
    v_x: float
    v_r: float
    v_t: float


def greeks(
    model,
    contract,
    surface,
    t,
    r,
    x,
    bump_x=None,
    bump_r=1e-4,
    bump_t=None,
    quad=None,
) -> Greeks:
    """Finite-difference sensitivities of the decomposition value.

    Central differences in x, r and t; one-sided in t when a bump would cross
    maturity.  In the stopping region v = K - x, so (-1, 0, 0) is returned.
    """
    _check_surface(surface)
    T = contract.maturity
    bump_x = 1e-3 * x if bump_x is None else bump_x
    bump_t = 1e-3 * T if bump_t is None else bump_t
    if min(bump_x, bump_r, bump_t) <= 0:
        raise ValueError("bumps must be > 0")
    if exercise_decision(surface, t, r, x, T):
        return Greeks(-1.0, 0.0, 0.0)
    xs = np.array([x + bump_x, x - bump_x, x, x])
    rs = np.array([r, r, r + bump_r, r - bump_r])
    v = values(model, contract, surface, t, rs, xs, quad)
    v_x = (v[0] - v[1]) / (2 * bump_x)
    v_r = (v[2] - v[3]) / (2 * bump_r)
    if t + bump_t <= T and t - bump_t >= 0:
        up = values(model, contract, surface, t + bump_t, r, x, quad)[0]
        dn = values(model, contract, surface, t - bump_t, r, x, quad)[0]
        v_t = (up - dn) / (2 * bump_t)
    else:
        here = values(model, contract, surface, t, r, x, quad)[0]
        if t + bump_t <= T:
            v_t = (values(model, contract, surface, t + bump_t, r, x, quad)[0] - here) / bump_t
        else:
            v_t = (here - values(model, contract, surface, t - bump_t, r, x, quad)[0]) / bump_t
    return Greeks(float(v_x), float(v_r), float(v_t))
