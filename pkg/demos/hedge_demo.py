"""Delta-hedge the put along simulated paths at three rebalancing frequencies."""

from vasicek_put import Grid, MarketModel, OptionContract, solve
from vasicek_put.hedging import hedge_backtest
from vasicek_put.montecarlo import PathConfig

model = MarketModel.default()
contract = OptionContract.default()
surf, _ = solve(model, contract, Grid.default(1.0, n_t=16, n_r=21), eps=0.01)

reports = hedge_backtest(model, contract, surf, 0.0478, 82.11, PathConfig(2000, 1, seed=5), (50, 100, 200))
print("steps/yr  rms error  mean consumption  max shortfall")
for rep in reports:
    print(f"{rep.rebalance_steps:8d}  {rep.rms_replication_error:9.4f}  {rep.mean_consumption:16.4f}"
          f"  {rep.max_shortfall:13.4f}")
