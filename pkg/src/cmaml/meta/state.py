"""Meta-level state and configuration."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BASELINE_MODES = ("cmaml", "maml_unconstrained", "pretrain_single", "random")
ETA_TERM_MODES = ("per_step", "initial_state")


@dataclass
class MetaState:
    policy_params: np.ndarray
    cost_critic: np.ndarray
    lam: float = 0.0
    eta: float = 0.0
    iteration: int = 0

    def __post_init__(self):
        if self.lam < 0 or self.eta < 0:
            raise ValueError("meta multipliers must be >= 0")


@dataclass(frozen=True)
class OuterConfig:
    """Outer-loop settings.

    ``lambda_trainable`` / ``eta_trainable`` freeze a multiplier at its initial
    value (the frozen-eta ablation arm sets ``eta_init = 0`` and
    ``eta_trainable = False``). ``post_rollouts`` episodes under every adapted
    policy feed the first-order meta-gradient; ``meta_rollouts`` episodes
    under the meta policy feed the safety term, the ``eta`` update and the
    meta cost critic.
    """

    N: int = 10
    B: int = 4
    meta_lr_policy: float = 0.05
    meta_lr_lambda: float = 0.05
    meta_lr_eta: float = 0.05
    lambda_init: float = 0.0
    eta_init: float = 0.0
    lambda_trainable: bool = True
    eta_trainable: bool = True
    meta_rollouts: int = 10
    post_rollouts: int = 10
    baseline_mode: str = "cmaml"
    eta_term_mode: str = "per_step"
    meta_gae_lambda: float = 1.0
    policy_hidden: tuple = (32, 32)
    init_output_scale: float = 0.01
    init_log_std: float = -0.5
    max_grad_norm: float | None = None
    abort_fraction: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "policy_hidden", tuple(int(h) for h in self.policy_hidden))
        if self.N < 1 or self.B < 1:
            raise ValueError("N and B must be >= 1")
        for name in ("meta_lr_policy", "meta_lr_lambda", "meta_lr_eta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.lambda_init < 0 or self.eta_init < 0:
            raise ValueError("initial multipliers must be >= 0")
        if self.meta_rollouts < 1 or self.post_rollouts < 1:
            raise ValueError("rollout counts must be >= 1")
        if self.baseline_mode not in BASELINE_MODES:
            raise ValueError(f"baseline_mode must be one of {BASELINE_MODES}")
        if self.eta_term_mode not in ETA_TERM_MODES:
            raise ValueError(f"eta_term_mode must be one of {ETA_TERM_MODES}")
        if not 0.0 <= self.meta_gae_lambda <= 1.0:
            raise ValueError("meta_gae_lambda must lie in [0, 1]")


@dataclass
class MetaGradientReport:
    fomaml_term: np.ndarray
    eta_term: np.ndarray
    lambda_gradient: float
    eta_gradient: float
    task_J: list = field(default_factory=list)
    task_J_C: list = field(default_factory=list)

    def __post_init__(self):
        vals = [self.lambda_gradient, self.eta_gradient, *self.task_J, *self.task_J_C]
        if not (np.all(np.isfinite(self.fomaml_term)) and np.all(np.isfinite(self.eta_term))
                and np.all(np.isfinite(vals))):
            raise FloatingPointError("non-finite meta gradient")
