"""American put under Vasicek rates: exercise boundary, pricing and Monte Carlo checks."""

from .boundary import SolveDiagnostics, node_update, residual, solve
from .kernels import QuadratureConfig, QuadratureError, european_put, premium, premium_integrand
from .model import (
    MarketModel,
    OptionContract,
    PricingInputs,
    VasicekParams,
    bond_price,
    forward_rate,
    g,
    pricing_inputs,
    rate_moments,
)
from .pricer import PricingResult, exercise_decision, greeks, price
from .surface import BoundarySurface, Grid, boundary_inverse, initial_surface, interpolate

__all__ = [
    "BoundarySurface", "Grid", "MarketModel", "OptionContract", "PricingInputs", "PricingResult",
    "QuadratureConfig", "QuadratureError", "SolveDiagnostics", "VasicekParams", "bond_price",
    "boundary_inverse", "european_put", "exercise_decision", "forward_rate", "g", "greeks",
    "initial_surface", "interpolate", "node_update", "premium", "premium_integrand", "price",
    "pricing_inputs", "rate_moments", "residual", "solve",
]
