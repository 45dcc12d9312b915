"""Fixed-point solver for the exercise boundary b(t, r)."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kernels import QuadratureConfig, european_put, premium
from .model import MarketModel, OptionContract, bond_price
from .surface import BoundarySurface, Grid, initial_surface

log = logging.getLogger(__name__)


@dataclass
class SolveDiagnostics:
    iterations: int = 0
    sup_diffs: list[float] = field(default_factory=list)
    residual_max: float = float("nan")
    converged: bool = False

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "sup_diffs": list(self.sup_diffs),
            "residual_max": self.residual_max,
            "converged": self.converged,
        }


def solve_algebraic(model, contract, t, r, rhs, tol=None, max_bisect=200):
    """Largest-root bisection for K - b - v_e(t, r, b) = rhs, vectorised over r.

    The left-hand side is nonincreasing in b (dv_e/dx lies in [-1, 0]), so a
    sign change on (0, K) is bracketed.  Returns 0 where K - v_e(0+) <= rhs.
    """
    K = contract.strike
    tol = 1e-8 * K if tol is None else tol
    r = np.atleast_1d(np.asarray(r, dtype=float))
    rhs = np.broadcast_to(np.asarray(rhs, dtype=float), r.shape)
    P = bond_price(model.rates, t, r, contract.maturity)
    f0 = K - K * P - rhs  # limit b -> 0+: v_e -> K P
    lo = np.zeros_like(r)
    hi = np.full_like(r, K)
    active = f0 > 0
    for _ in range(max_bisect):
        if not active.any() or np.max(hi[active] - lo[active]) <= tol:
            break
        mid = 0.5 * (lo + hi)
        mid_safe = np.where(active, mid, 0.5 * K)
        f = K - mid_safe - european_put(model, contract, t, r, mid_safe) - rhs
        pos = f > 0
        lo = np.where(active & pos, mid, lo)
        hi = np.where(active & ~pos, mid, hi)
    else:
        raise RuntimeError("bisection failed to reach tolerance")
    return np.where(active, 0.5 * (lo + hi), 0.0)


def node_update(model, contract, t_i, r_j, prev: BoundarySurface, quad=None, x_prev=None):
    """New boundary values on one time row given the previous iterate.

    The premium is evaluated with the previous surface at the previous
    boundary point, then the explicit left-hand side is inverted.
    """
    r_j = np.atleast_1d(np.asarray(r_j, dtype=float))
    if x_prev is None:
        x_prev = prev(np.full_like(r_j, t_i), r_j)
    vp = premium(model, contract, t_i, r_j, x_prev, prev, quad)
    out = solve_algebraic(model, contract, t_i, r_j, vp)
    # At r = 0 the frozen-price map has both 0 and a positive value as
    # self-consistent states; the node is pinned to the left value.
    out[r_j == 0.0] = 0.0
    return out


def residual(model, contract, surface: BoundarySurface, quad=None):
    """K - b - v_p(b; b) - v_e(b) at every node; NaN where b == 0."""
    g = surface.grid
    out = np.full(g.shape, np.nan)
    K = contract.strike
    for i, t in enumerate(g.t_nodes):
        b = surface.values[i]
        pos = b > 0
        if not pos.any():
            continue
        r = g.r_nodes[pos]
        vp = premium(model, contract, t, r, b[pos], surface, quad)
        ve = european_put(model, contract, t, r, b[pos])
        out[i, pos] = K - b[pos] - vp - ve
    return out


def solve(
    model: MarketModel,
    contract: OptionContract,
    grid: Grid | None = None,
    eps: float = 0.01,
    max_iter: int = 200,
    quad: QuadratureConfig | None = None,
    initial: BoundarySurface | None = None,
    callback=None,
    threads: int = 1,
    residual_quad: QuadratureConfig | None = None,
):
    """Jacobi fixed-point iteration from b = K until the sup-norm step < eps.

    Rows of one sweep are independent and can be spread over ``threads``
    workers without changing the result.  With ``residual_quad`` the max
    absolute integral-equation residual of the final surface is recorded.
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    grid = grid or Grid.default(contract.maturity)
    quad = quad or QuadratureConfig()
    surf = initial or initial_surface(grid, contract.strike)
    diag = SolveDiagnostics()
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    mapper = pool.map if pool else map
    for n in range(1, max_iter + 1):
        prev = surf
        rows = mapper(
            lambda i: node_update(model, contract, grid.t_nodes[i], grid.r_nodes, prev, quad, x_prev=prev.values[i]),
            range(grid.t_nodes.size),
        )
        new = np.array(list(rows))
        step = float(np.max(np.abs(new - surf.values)))
        diag.iterations = n
        diag.sup_diffs.append(step)
        surf = surf.with_values(new)
        log.debug("sweep %d: sup diff %.3e", n, step)
        if callback is not None:
            callback(n, surf, step)
        if step < eps:
            diag.converged = True
            break
    if pool:
        pool.shutdown()
    surf.converged = diag.converged
    if residual_quad is not None:
        res = residual(model, contract, surf, residual_quad)
        diag.residual_max = float(np.nanmax(np.abs(res))) if np.isfinite(res).any() else 0.0
    return surf, diag
