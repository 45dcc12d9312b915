"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a PASS/FAIL line that is printed in the terminal summary.
"""

import dataclasses
import time

import numpy as np
import pytest

from vasicek_put.boundary import residual, solve
from vasicek_put.hedging import hedge_backtest
from vasicek_put.kernels import QuadratureConfig, european_put, premium
from vasicek_put.model import bond_price
from vasicek_put.montecarlo import PathConfig, PathSource, estimate_discounted, ls_american, mc_premium, terminal_source
from vasicek_put.pricer import exercise_decision, greeks, price, values
from vasicek_put.surface import Grid

from conftest import ACCEPTANCE_LINES, PAPER_POINT

EPS = 0.01
SEED = 20240601


def record(n, ok, detail):
    ACCEPTANCE_LINES.append(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    print(ACCEPTANCE_LINES[-1])
    assert ok, detail


def test_c01_bond_monte_carlo(model):
    _, r, x = PAPER_POINT
    t0 = time.perf_counter()
    est = estimate_discounted(terminal_source(model, r, x, 1.0, 10**6, seed=SEED), lambda *_: 1.0)
    dt = time.perf_counter() - t0
    ref = float(bond_price(model.rates, 0.0, r, 1.0))
    err = abs(est.estimate - ref)
    record(1, err < 3 * est.stderr and dt < 5,
           f"bond closed={ref:.8f} mc={est.estimate:.8f} |diff|={err:.2e} 3se={3 * est.stderr:.2e} time={dt:.2f}s")


def test_c02_european_monte_carlo(model, contract):
    t, r, x = PAPER_POINT
    t0 = time.perf_counter()
    src = terminal_source(model, r, x, 1.0, 10**6, seed=SEED + 1)
    est = estimate_discounted(src, lambda _r, _i, xt: np.maximum(contract.strike - xt, 0.0))
    dt = time.perf_counter() - t0
    ref = float(european_put(model, contract, t, r, x))
    err = abs(est.estimate - ref)
    record(2, err < 3 * est.stderr and dt < 30,
           f"european closed={ref:.5f} mc={est.estimate:.5f} |diff|={err:.2e} 3se={3 * est.stderr:.2e} "
           f"time={dt:.2f}s")


def test_c03_boundary_solver(timed_solve, contract):
    surf, diag, dt = timed_solve
    K = contract.strike
    v, rn = surf.values, surf.grid.r_nodes
    mono_t = np.diff(v, axis=0).min()
    mono_r = np.diff(v, axis=1).min()
    ok = (diag.converged and surf.values.shape == (50, 41) and mono_t >= -1e-6 * K and mono_r >= -1e-6 * K
          and np.all(v[:, rn < 0] == 0) and np.all((v[:, rn > 0] > 0) & (v[:, rn > 0] < K)) and dt < 600)
    record(3, ok, f"sweeps={diag.iterations} last_step={diag.sup_diffs[-1]:.2e} min_dt={mono_t:.2e} "
                  f"min_dr={mono_r:.2e} time={dt:.0f}s")


def test_c04_integral_equation_residual(model, contract, surface):
    res = residual(model, contract, surface, QuadratureConfig().doubled())
    worst = float(np.nanmax(np.abs(res)))
    record(4, worst < 5 * EPS, f"max residual at doubled quadrature={worst:.2e} (limit {5 * EPS})")


def test_c05_premium_monte_carlo(model, contract, surface):
    t, r, x = PAPER_POINT
    quad = float(premium(model, contract, t, r, x, surface))
    src = PathSource(model, r, x, 1.0, PathConfig(10**6, 500, seed=SEED + 2, block_size=1 << 14))
    est = mc_premium(src, surface, contract)
    bias = est.extra["bias_bound"]
    tol = max(3 * est.stderr, bias)
    err = abs(est.estimate - quad)
    record(5, err < tol, f"premium quad={quad:.5f} mc={est.estimate:.5f} |diff|={err:.2e} 3se={3 * est.stderr:.2e} "
                         f"bias_bound={bias:.2e}")


def test_c06_american_bracket(model, contract, surface):
    t, r, x = PAPER_POINT
    v = price(model, contract, surface, t, r, x)
    ls = ls_american(model, contract, r, x, PathConfig(100000, 50, seed=SEED + 3))
    gap = abs(v.value - ls.estimate) / v.value
    ok = v.value >= v.european and v.value >= ls.estimate - 3 * ls.stderr and gap < 0.02
    record(6, ok, f"decomposition={v.value:.4f} european={v.european:.4f} ls={ls.estimate:.4f}"
                  f"+-{ls.stderr:.4f} relative gap={gap:.2%}")


BOX_T = np.linspace(0.0, 0.9, 10)
BOX_R = np.linspace(-0.02, 0.12, 10)
BOX_X = np.linspace(40.0, 130.0, 10)


def test_c07_value_shape(model, contract, surface):
    K = contract.strike
    R, X = np.meshgrid(BOX_R, BOX_X, indexing="ij")
    V = np.stack([values(model, contract, surface, t, R.ravel(), X.ravel()).reshape(R.shape) for t in BOX_T])
    tol = 1e-6 * K
    checks = {
        "v>=payoff": (V - np.maximum(K - X, 0.0)).min() >= -tol,
        "v<=K": V.max() <= K,
        "dec t": np.diff(V, axis=0).max() <= tol,
        "dec r": np.diff(V, axis=1).max() <= tol,
        "dec x": np.diff(V, axis=2).max() <= tol,
        "convex x": np.diff(V, 2, axis=2).min() >= -tol,
    }
    bad = [k for k, ok in checks.items() if not ok]
    record(7, not bad, f"1000 points; failed: {bad or 'none'}; max dv/dt step={np.diff(V, axis=0).max():.2e}")


def test_c08_gradients(model, contract, surface):
    lo, hi = np.inf, -np.inf
    stop_exact = True
    for t in BOX_T:
        for r in BOX_R:
            for x in BOX_X:
                g = greeks(model, contract, surface, t, r, x)
                lo, hi = min(lo, g.v_x), max(hi, g.v_x)
                if exercise_decision(surface, t, r, x):
                    stop_exact &= (g.v_x, g.v_r, g.v_t) == (-1.0, 0.0, 0.0)
    fit = []
    for t in [0.0, 0.3, 0.6, 0.9]:
        for r in [0.01, 0.04, 0.08, 0.12]:
            x = 1.001 * float(surface(t, r))
            bump = 1e-3 * x
            g = greeks(model, contract, surface, t, r, x, bump_x=bump)
            # dimensionless reading of "within 5 bump_x"
            fit.append(abs(g.v_x + 1) / (5 * bump / x))
    ok = lo >= -1 - 1e-4 and hi <= 1e-4 and stop_exact and max(fit) <= 1
    record(8, ok, f"v_x in [{lo:.5f}, {hi:.2e}]; stopping region exact={stop_exact}; "
                  f"worst smooth-fit ratio={max(fit):.2f}")


@pytest.fixture(scope="module")
def rho_surfaces(model, contract):
    return {rho: solve(dataclasses.replace(model, rho=rho), contract, Grid.default(1.0), eps=EPS)
            for rho in (-0.8, 0.0, 0.8)}


def test_c09_sensitivities(model, contract, rho_surfaces):
    lines, ok = [], True
    # rho: every node of the default grid
    nodes = {rho: s.values for rho, (s, _) in rho_surfaces.items()}
    conv = all(d.converged for _, d in rho_surfaces.values())
    d1, d2 = (nodes[0.0] - nodes[-0.8]).min(), (nodes[0.8] - nodes[0.0]).min()
    ok &= conv and d1 >= -EPS and d2 >= -EPS
    lines.append(f"rho min node diffs=({d1:.2e}, {d2:.2e})")
    # sigma: value at the paper point
    t, r, x = PAPER_POINT
    coarse = Grid.default(1.0, 16, 21)
    vs = []
    for s in (0.1, 0.3, 0.5):
        m = dataclasses.replace(model, sigma=s)
        surf, d = solve(m, contract, coarse, eps=EPS)
        ok &= d.converged
        vs.append(price(m, contract, surf, t, r, x).value)
    ok &= bool(np.all(np.diff(vs) >= -EPS))
    lines.append("sigma values=" + "/".join(f"{v:.3f}" for v in vs))
    # kappa: spread of the boundary across mean-reversion speeds, by rate
    bk = []
    for k in (0.1, 0.3, 1.0):
        m = dataclasses.replace(model, rates=dataclasses.replace(model.rates, kappa=k))
        surf, d = solve(m, contract, coarse, eps=EPS)
        ok &= d.converged
        bk.append(surf.values[0])
    rn = coarse.r_nodes
    spread = np.ptp(np.stack(bk), axis=0)
    pos = rn > 0
    mid = spread[pos][np.argmin(np.abs(rn[pos] - model.rates.theta))]
    ends = min(spread[pos][0], spread[pos][-1])
    ok &= ends > mid + EPS
    lines.append(f"kappa spread at t=0: r={rn[pos][0]:.3f} {spread[pos][0]:.3f}, near theta {mid:.3f}, "
                 f"r={rn[-1]:.3f} {spread[pos][-1]:.3f}")
    record(9, ok, "; ".join(lines))


def test_c10_hedge_backtest(model, contract, surface):
    _, r, x = PAPER_POINT
    t0 = time.perf_counter()
    reps = hedge_backtest(model, contract, surface, r, x, PathConfig(10**4, 1, seed=SEED + 4), (50, 100, 200))
    dt = time.perf_counter() - t0
    rms = [rep.rms_replication_error for rep in reps]
    ok = (all(rep.min_consumption_increment >= 0 and rep.continuation_consumption_max == 0 for rep in reps)
          and rms[0] > rms[1] > rms[2] and dt < 300)
    record(10, ok, "rms=" + "/".join(f"{v:.3f}" for v in rms) + f" at 50/100/200 per year; time={dt:.0f}s")
