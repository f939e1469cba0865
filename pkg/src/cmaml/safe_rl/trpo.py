"""Trust-region policy steps: TRPO and its Lagrangian variant."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numkit.optim import NumericError, backtracking_line_search, conjugate_gradient
from ..numkit.policy import Policy, fisher_vector_product
from .batch import RolloutBatch, make_batch
from .config import InnerLoopConfig


@dataclass
class StepInfo:
    accepted: bool
    kl: float  # mean KL(old || new) of the returned policy, 0 for a no-op
    improvement: float  # reward-surrogate gain of the returned policy
    backtracks: int
    case: str = "trpo"
    cost_change: float = 0.0  # linearised cost-surrogate change (cpo)


def as_batch(data) -> RolloutBatch:
    return data if isinstance(data, RolloutBatch) else make_batch(data)


class Surrogate:
    """Importance-ratio surrogates around the data-collecting parameters.

    ``value(params, w)`` is ``sum_i w_i (ratio_i - 1)``: the first-order
    change of the corresponding objective when the per-sample weights
    ``w`` are advantages already divided by the normaliser.
    """

    def __init__(self, policy: Policy, params, batch: RolloutBatch):
        self.policy = policy
        self.params = np.asarray(params, dtype=float)
        self.batch = batch
        self.old_dist = policy.dist(self.params, batch.obs)
        self.logp_old = policy.log_prob(self.params, batch.obs, batch.actions)

    def change(self, params, weights):
        logp = self.policy.log_prob(params, self.batch.obs, self.batch.actions)
        return float(np.sum(weights * np.expm1(logp - self.logp_old)))

    def grad(self, weights):
        g = self.policy.grad_log_prob(self.params, self.batch.obs, self.batch.actions, weights)
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite policy gradient; step aborted "
                               f"(|weights|max={np.max(np.abs(weights)):.3g})")
        return g

    def kl(self, params):
        return self.policy.mean_kl(self.old_dist, params, self.batch.obs)

    def fvp(self, damping):
        return lambda v: fisher_vector_product(self.policy, self.params, self.batch.obs, v, damping)


def _natural_step(sur: Surrogate, g, cfg: InnerLoopConfig):
    """Full trust-region step ``sqrt(2 eps / x'Fx) x`` with ``x = CG(F, g)``."""
    fvp = sur.fvp(cfg.damping)
    x = conjugate_gradient(fvp, g, iters=cfg.cg_iters)
    xFx = float(x @ fvp(x))
    if not np.isfinite(xFx):
        raise NumericError("non-finite curvature along the natural gradient")
    if xFx <= 0:
        return None
    return np.sqrt(2.0 * cfg.kl_threshold / xFx) * x


def trpo_line_search(sur: Surrogate, full_step, weights, cfg: InnerLoopConfig, case="trpo"):
    limit = cfg.kl_slack * cfg.kl_threshold

    def accept(step):
        new = sur.params + step
        imp = sur.change(new, weights)
        kl = sur.kl(new)
        return (imp > 0.0 and kl <= limit), (imp, kl)

    step, (imp, kl), k = backtracking_line_search(accept, full_step, cfg.backtrack_coeff,
                                                  cfg.backtrack_limit)
    if step is None:
        return sur.params.copy(), StepInfo(False, 0.0, 0.0, k, case)
    return sur.params + step, StepInfo(True, kl, imp, k, case)


def trpo_step(policy: Policy, params, data, advantages, cfg: InnerLoopConfig = InnerLoopConfig(),
              surrogate: Surrogate | None = None):
    """Maximise the mean importance-ratio surrogate within the KL trust region.

    Returns ``(new_params, StepInfo)``. When no backtracking trial both
    improves the surrogate and keeps the mean KL within ``kl_slack * eps`` the
    parameters come back unchanged.
    """
    batch = as_batch(data)
    sur = surrogate or Surrogate(policy, params, batch)
    weights = np.asarray(advantages, dtype=float) / len(batch)
    g = sur.grad(weights)
    if not np.any(g):
        return sur.params.copy(), StepInfo(False, 0.0, 0.0, 0, "zero_gradient")
    full = _natural_step(sur, g, cfg)
    if full is None:
        return sur.params.copy(), StepInfo(False, 0.0, 0.0, 0, "no_curvature")
    return trpo_line_search(sur, full, weights, cfg)


def update_lagrange(lam, J_C, d, lr):
    """Projected dual ascent ``max(0, lam + lr (J_C - d))``."""
    if lam < 0:
        raise ValueError("multiplier must be >= 0")
    return max(0.0, float(lam) + float(lr) * (float(J_C) - float(d)))


def combined_advantage(reward_adv, cost_adv, lam):
    return (np.asarray(reward_adv) - lam * np.asarray(cost_adv)) / (1.0 + lam)


def trpo_lag_step(policy: Policy, params, lam, data, reward_advantages, cost_advantages, J_C, d,
                  cfg: InnerLoopConfig = InnerLoopConfig()):
    """Primal TRPO step on ``(A - lam A_C) / (1 + lam)`` then one dual step from the pre-step ``J_C``.

    Returns ``(new_params, new_lam, StepInfo)``.
    """
    if lam < 0:
        raise ValueError("multiplier must be >= 0")
    new_params, info = trpo_step(policy, params, data,
                                 combined_advantage(reward_advantages, cost_advantages, lam), cfg)
    return new_params, update_lagrange(lam, J_C, d, cfg.lambda_lr), info
