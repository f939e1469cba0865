"""Inner-loop safe policy optimisers: TRPO, TRPO-Lagrangian and CPO."""
from .adapt import AdaptationResult, adapt_task, advantages, critic_spec_for, fit_critics, inner_update
from .batch import BatchEstimates, RolloutBatch, bootstrap_value, estimate, fit_critic, make_batch
from .config import InnerLoopConfig
from .cpo import CpoDual, cpo_dual_value, cpo_step, solve_cpo_dual
from .trpo import StepInfo, Surrogate, combined_advantage, trpo_lag_step, trpo_step, update_lagrange

__all__ = [
    "AdaptationResult", "adapt_task", "advantages", "critic_spec_for", "fit_critics",
    "inner_update", "BatchEstimates", "RolloutBatch", "bootstrap_value", "estimate", "fit_critic", "make_batch",
    "InnerLoopConfig", "CpoDual", "cpo_dual_value", "cpo_step", "solve_cpo_dual", "StepInfo",
    "Surrogate", "combined_advantage", "trpo_lag_step", "trpo_step", "update_lagrange",
]
