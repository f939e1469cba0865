"""The constrained meta-learning outer loop, baselines and fine-tuning."""
from .checkpoint import CheckpointError, MetaCheckpoint
from .gradients import (
    cost_gradient_estimate,
    eta_safety_gradient,
    fomaml_task_gradient,
    initial_state_values,
    train_meta_cost_critic,
    update_eta,
    update_meta_lambda,
)
from .state import BASELINE_MODES, MetaGradientReport, MetaState, OuterConfig
from .train import (
    MetaTrainingError,
    episodes_per_iteration,
    fine_tune,
    meta_train,
    policy_for,
    policy_from_checkpoint,
)

__all__ = [
    "CheckpointError", "MetaCheckpoint", "cost_gradient_estimate", "eta_safety_gradient",
    "fomaml_task_gradient", "initial_state_values", "train_meta_cost_critic", "update_eta",
    "update_meta_lambda", "BASELINE_MODES", "MetaGradientReport", "MetaState", "OuterConfig",
    "MetaTrainingError", "episodes_per_iteration", "fine_tune", "meta_train", "policy_for",
    "policy_from_checkpoint",
]
