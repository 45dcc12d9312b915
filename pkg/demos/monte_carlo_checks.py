"""Closed forms against the exact-transition simulator.

Bond and European put from one exact step, then the early-exercise premium
and a Longstaff-Schwartz American estimate from full paths.
"""

import numpy as np

from vasicek_put import Grid, MarketModel, OptionContract, price, solve
from vasicek_put.kernels import european_put
from vasicek_put.model import bond_price
from vasicek_put.montecarlo import PathConfig, PathSource, estimate_discounted, ls_american, mc_premium, terminal_source

model = MarketModel.default()
contract = OptionContract.default()
t, r, x = 0.0, 0.0478, 82.11
K = contract.strike

src = terminal_source(model, r, x, 1.0, 10**6, seed=1)
bond = estimate_discounted(src, lambda *_: 1.0)
eur = estimate_discounted(src, lambda _r, _i, xt: np.maximum(K - xt, 0.0))
print(f"bond      {bond_price(model.rates, t, r, 1.0):.6f}  mc {bond.estimate:.6f} +- {bond.stderr:.1e}")
print(f"european  {european_put(model, contract, t, r, x):.4f}    mc {eur.estimate:.4f} +- {eur.stderr:.4f}")

surf, _ = solve(model, contract, Grid.default(1.0, n_t=16, n_r=21), eps=0.01)
res = price(model, contract, surf, t, r, x)
prem = mc_premium(PathSource(model, r, x, 1.0, PathConfig(100000, 200, seed=2)), surf, contract)
print(f"premium   {res.premium:.4f}    mc {prem.estimate:.4f} +- {prem.stderr:.4f} "
      f"(step bias <= {prem.extra['bias_bound']:.1e})")

ls = ls_american(model, contract, r, x, PathConfig(100000, 50, seed=3))
print(f"american  {res.value:.4f}   LS {ls.estimate:.4f} +- {ls.stderr:.4f}")
