"""Task adaptation: the inner loop that turns a meta policy into a task policy."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..envs.base import rollouts
from ..numkit.mlp import MlpSpec, init_params
from ..numkit.policy import Policy
from .batch import RolloutBatch, critic_values, estimate, fit_critic, make_batch
from .config import InnerLoopConfig
from .cpo import cpo_step
from .trpo import trpo_lag_step, trpo_step

TRACE_FIELDS = ("J", "J_C", "mean_return", "mean_cost", "lam", "kl", "accepted")


@dataclass
class AdaptationResult:
    policy_params: np.ndarray
    lam: float
    reward_critic: np.ndarray
    cost_critic: np.ndarray
    trace: dict = field(default_factory=dict)  # name -> list, one entry per step
    cases: list = field(default_factory=list)

    def trace_array(self, name):
        return np.asarray(self.trace[name], dtype=float)


def critic_spec_for(task, cfg: InnerLoopConfig) -> MlpSpec:
    return MlpSpec.value(task.obs_dim, cfg.critic_hidden)


def fit_critics(batch: RolloutBatch, reward_spec, reward_critic, cost_critic, gamma, cost_gamma,
                cfg: InnerLoopConfig):
    """Regress both critics onto bootstrapped returns-to-go of ``batch``."""
    rv, rl = critic_values(reward_spec, reward_critic, batch)
    cv, cl = critic_values(reward_spec, cost_critic, batch)
    est = estimate(batch, rv, cv, rl, cl, gamma, cost_gamma, 1.0, normalize_rewards=False)
    reward_critic = fit_critic(reward_spec, reward_critic, batch.obs, est.reward_targets,
                               cfg.critic_epochs, cfg.critic_lr)
    cost_critic = fit_critic(reward_spec, cost_critic, batch.obs, est.cost_targets,
                             cfg.critic_epochs, cfg.critic_lr)
    return reward_critic, cost_critic


def advantages(batch, spec, reward_critic, cost_critic, gamma, cost_gamma, cfg):
    rv, rl = critic_values(spec, reward_critic, batch)
    cv, cl = critic_values(spec, cost_critic, batch)
    return estimate(batch, rv, cv, rl, cl, gamma, cost_gamma, cfg.gae_lambda,
                    cfg.normalize_reward_advantages)


def inner_update(policy, params, lam, batch, est, task, cfg: InnerLoopConfig, cost_gamma):
    """One policy step of the configured algorithm; returns ``(params, lam, StepInfo)``."""
    if cfg.algorithm == "trpo":
        new, info = trpo_step(policy, params, batch, est.reward_adv, cfg)
        return new, lam, info
    if cfg.algorithm == "trpo_lag":
        return trpo_lag_step(policy, params, lam, batch, est.reward_adv, est.cost_adv, est.J_C,
                             task.cost_limit, cfg)
    new, info = cpo_step(policy, params, batch, est.reward_adv, est.cost_adv, est.J_C,
                         task.cost_limit, cfg, cost_gamma=cost_gamma)
    return new, lam, info


def adapt_task(policy: Policy, meta_params, meta_lambda, meta_cost_critic, task,
               cfg: InnerLoopConfig, rng, reward_critic=None) -> AdaptationResult:
    """Adapt the meta policy to ``task`` with ``cfg.adaptation_steps`` policy steps.

    The task policy and its multiplier start from the meta values and the
    cost critic from the meta cost critic; the reward critic starts from
    random weights unless one is supplied. Each step collects
    ``rollouts_per_step`` episodes, refits both critics on them, then runs one
    update of the configured algorithm.
    """
    if cfg.adaptation_steps < 1:
        raise ValueError("adaptation_steps must be >= 1")
    if policy.obs_dim != task.obs_dim:
        raise ValueError(f"policy takes {policy.obs_dim} inputs, task emits {task.obs_dim}")
    spec = critic_spec_for(task, cfg)
    params = np.array(meta_params, dtype=float)
    lam = float(meta_lambda)
    cost_critic = np.array(meta_cost_critic, dtype=float)
    if reward_critic is None:
        reward_critic = init_params(spec, rng)
    cost_gamma = cfg.cost_gamma(task.gamma)
    trace = {k: [] for k in TRACE_FIELDS}
    cases = []
    for _ in range(cfg.adaptation_steps):
        batch = make_batch(rollouts(task, policy, params, rng, cfg.rollouts_per_step))
        reward_critic, cost_critic = fit_critics(batch, spec, reward_critic, cost_critic,
                                                 task.gamma, cost_gamma, cfg)
        est = advantages(batch, spec, reward_critic, cost_critic, task.gamma, cost_gamma, cfg)
        lam_before = lam
        params, lam, info = inner_update(policy, params, lam, batch, est, task, cfg, cost_gamma)
        for k, v in (("J", est.J), ("J_C", est.J_C), ("mean_return", est.mean_return),
                     ("mean_cost", est.mean_cost), ("lam", lam_before), ("kl", info.kl),
                     ("accepted", float(info.accepted))):
            trace[k].append(v)
        cases.append(info.case)
    return AdaptationResult(params, lam, reward_critic, cost_critic, trace, cases)
