"""Inner-loop configuration."""
from __future__ import annotations

from dataclasses import dataclass

ALGORITHMS = ("trpo", "trpo_lag", "cpo")
DUAL_COST_MODES = ("discounted", "undiscounted")


@dataclass(frozen=True)
class InnerLoopConfig:
    """Settings of one task adaptation.

    ``dual_cost_mode`` picks how the cost return entering the constraint is
    measured: discounted by the task's ``gamma`` or summed over the episode.
    The same choice drives the cost critic targets and cost advantages, so
    the constraint, its gradient and the duals always refer to one quantity.
    """

    algorithm: str = "trpo_lag"
    kl_threshold: float = 0.01
    lambda_init: float = 0.0
    lambda_lr: float = 0.05
    adaptation_steps: int = 1
    rollouts_per_step: int = 10
    cg_iters: int = 10
    damping: float = 0.1
    backtrack_coeff: float = 0.8
    backtrack_limit: int = 10
    kl_slack: float = 1.5
    gae_lambda: float = 0.95
    normalize_reward_advantages: bool = True
    critic_hidden: tuple = (32, 32)
    critic_epochs: int = 50
    critic_lr: float = 1e-2
    dual_cost_mode: str = "discounted"

    def __post_init__(self):
        object.__setattr__(self, "critic_hidden", tuple(int(h) for h in self.critic_hidden))
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not self.kl_threshold > 0:
            raise ValueError("kl_threshold must be > 0")
        if self.lambda_init < 0:
            raise ValueError("lambda_init must be >= 0")
        if not self.lambda_lr > 0:
            raise ValueError("lambda_lr must be > 0")
        if self.adaptation_steps < 1 or self.rollouts_per_step < 1:
            raise ValueError("adaptation_steps and rollouts_per_step must be >= 1")
        if self.cg_iters < 1 or self.backtrack_limit < 1:
            raise ValueError("cg_iters and backtrack_limit must be >= 1")
        if not self.damping > 0 or not 0 < self.backtrack_coeff < 1:
            raise ValueError("need damping > 0 and 0 < backtrack_coeff < 1")
        if self.dual_cost_mode not in DUAL_COST_MODES:
            raise ValueError(f"dual_cost_mode must be one of {DUAL_COST_MODES}")

    def cost_gamma(self, gamma):
        return float(gamma) if self.dual_cost_mode == "discounted" else 1.0
