"""Exact ground truth for small tabular CMDPs."""
from .exact import (
    ExactSolution,
    ExactValues,
    binding_cost_limit,
    exact_policy_eval,
    exact_policy_gradient,
    minimum_cost,
    policy_from_occupancy,
    solve_cmdp_lp,
    value_iteration,
)
from .simplex import LpResult, simplex

__all__ = [
    "ExactSolution", "ExactValues", "binding_cost_limit", "exact_policy_eval",
    "exact_policy_gradient", "minimum_cost", "policy_from_occupancy", "solve_cmdp_lp",
    "value_iteration", "LpResult", "simplex",
]
