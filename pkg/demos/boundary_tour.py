"""Solve a boundary on a small grid and look at it.

Prints the boundary at a few times, the price split at the reference point
and how the boundary moves when the stock/rate correlation changes.
Runs in about a minute.
"""

import dataclasses

import numpy as np

from vasicek_put import Grid, MarketModel, OptionContract, price, solve

model = MarketModel.default()
contract = OptionContract.default()
grid = Grid.default(contract.maturity, n_t=16, n_r=21)

surf, diag = solve(model, contract, grid, eps=0.01)
print(f"converged={diag.converged} after {diag.iterations} sweeps, last step {diag.sup_diffs[-1]:.2e}")

rates = np.array([-0.01, 0.0, 0.01, 0.03, 0.05, 0.08, 0.12])
print("\nboundary b(t, r)")
print("   t  " + "".join(f"{r:>8.2f}" for r in rates))
for t in [0.0, 0.5, 0.9, 0.99]:
    print(f"{t:5.2f} " + "".join(f"{b:8.2f}" for b in surf(np.full_like(rates, t), rates)))

res = price(model, contract, surf, 0.0, 0.0478, 82.11)
print(f"\nAmerican {res.value:.4f} = European {res.european:.4f} + premium {res.premium:.4f}")
print(f"boundary at the point {res.boundary_at_point:.3f}, exercise now: {res.exercise_now}")

# the boundary rises with the stock/rate correlation
print("\nrho   b(0, 0.05)")
for rho in (-0.8, 0.0, 0.8):
    s, _ = solve(dataclasses.replace(model, rho=rho), contract, grid, eps=0.01)
    print(f"{rho:4.1f}  {float(s(0.0, 0.05)):.3f}")
