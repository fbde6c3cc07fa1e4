"""Chance-constrained stochastic electricity market clearing engine.

Clears a single-instant pool market under wind uncertainty with four
deterministic reformulations of the chance-constrained unit commitment,
prices energy/reserve/commitment from the duals of the augmented continuous
equivalent, settles producers, and verifies the equilibrium, cost-recovery,
revenue-adequacy, and chance-constraint claims.
"""
from .model import (
    Family,
    Formulation,
    Generator,
    MarketSolution,
    SystemCase,
    UncertaintyModel,
    adjust_epsilon_for_mu,
    expected_cost,
    recourse_output,
    reserve_margins,
    sigma_hat,
    sigma_tilde,
)
from .normal import matching_epsilon_chebyshev, std_normal_cdf, std_normal_quantile

__all__ = [
    "Family", "Formulation", "Generator", "MarketSolution", "SystemCase",
    "UncertaintyModel", "adjust_epsilon_for_mu", "expected_cost",
    "recourse_output", "reserve_margins", "sigma_hat", "sigma_tilde",
    "matching_epsilon_chebyshev", "std_normal_cdf", "std_normal_quantile",
]

__version__ = "0.1.0"
