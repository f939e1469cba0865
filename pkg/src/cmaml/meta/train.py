"""The constrained meta-training loop, its baselines and fine-tuning."""
from __future__ import annotations

import math
from dataclasses import asdict, replace

import numpy as np

from ..envs.base import rollouts
from ..envs.distribution import TaskSplit, sample_tasks
from ..numkit.mlp import MlpSpec, init_params
from ..numkit.optim import NumericError
from ..numkit.policy import Policy
from ..rng import purpose_code, stream
from ..safe_rl.adapt import adapt_task, advantages, critic_spec_for, fit_critics, inner_update
from ..safe_rl.batch import make_batch
from ..safe_rl.config import InnerLoopConfig
from .checkpoint import MetaCheckpoint
from .gradients import (
    eta_safety_gradient,
    fomaml_task_gradient,
    initial_state_values,
    train_meta_cost_critic,
    update_eta,
    update_meta_lambda,
)
from .state import MetaGradientReport, MetaState, OuterConfig

TASK_FAILURES = (NumericError, FloatingPointError, np.linalg.LinAlgError)


class MetaTrainingError(RuntimeError):
    pass


def _split(dist):
    return dist if isinstance(dist, TaskSplit) else dist.split("train")


def policy_for(task, hidden=(32, 32)) -> Policy:
    return Policy(MlpSpec.policy(task.obs_dim, task.act_dim, hidden, discrete=task.discrete))


def metrics_row(phase, iteration, task_id, batch, J, J_C, lam, eta, kl):
    return {
        "phase": phase, "iteration": int(iteration), "task_id": task_id,
        "mean_episode_return": float(np.mean(batch.episode_returns)),
        "mean_episode_cost": float(np.mean(batch.episode_costs)),
        "J": float(J), "J_C": float(J_C), "lam": float(lam), "eta": float(eta), "kl": float(kl),
    }


def _mean_limit(tasks):
    return float(np.mean([t.cost_limit for t in tasks]))


def initial_state(policy, critic_spec, outer: OuterConfig, seed) -> MetaState:
    rng = stream(seed, "init")
    params = policy.init(rng, output_scale=outer.init_output_scale, log_std_init=outer.init_log_std)
    critic = init_params(critic_spec, rng)
    return MetaState(params, critic, outer.lambda_init, outer.eta_init, 0)


def _checkpoint(state: MetaState, policy, critic_spec, outer, inner, seed, mode):
    config = {f"outer.{k}": v for k, v in asdict(outer).items()}
    config.update({f"inner.{k}": v for k, v in asdict(inner).items()})
    return MetaCheckpoint(mode, seed, state.iteration, state.lam, state.eta,
                          policy.spec.layer_sizes, policy.spec.output_head, critic_spec.layer_sizes,
                          {"policy": state.policy_params.copy(), "cost_critic": state.cost_critic.copy()},
                          config)


def meta_train(dist, inner: InnerLoopConfig, outer: OuterConfig, seed: int, log=None):
    """Run ``outer.N`` meta iterations; returns ``(MetaCheckpoint, rows, reports)``.

    ``rows`` holds one aggregate row per iteration (meta-policy rollouts)
    followed by one row per successfully adapted task (post-adaptation
    rollouts). A task whose adaptation raises a numerical error is skipped; an
    iteration in which at least ``abort_fraction`` of the tasks fail aborts
    the run with :class:`MetaTrainingError`.
    """
    split = _split(dist)
    probe = split.tasks()[0]
    policy = policy_for(probe, outer.policy_hidden)
    critic_spec = critic_spec_for(probe, inner)
    state = initial_state(policy, critic_spec, outer, seed)
    mode = outer.baseline_mode
    if mode == "maml_unconstrained":
        inner = replace(inner, algorithm="trpo")
        state.lam = state.eta = 0.0
    if mode == "random":
        return _checkpoint(state, policy, critic_spec, outer, inner, seed, mode), [], []
    if mode == "pretrain_single":
        return _pretrain_single(split, policy, critic_spec, state, inner, outer, seed, log)
    constrained = mode == "cmaml"
    rows, reports = [], []
    cost_gamma = inner.cost_gamma(probe.gamma)
    for it in range(outer.N):
        tasks = sorted(sample_tasks(split, outer.B, [seed, it]), key=lambda t: t.task_id)
        grads, task_J, task_J_C, task_rows, kls = [], [], [], [], []
        failures = 0
        for task in tasks:
            rng = stream(seed, "adapt", it, task.task_id)
            try:
                res = adapt_task(policy, state.policy_params, state.lam, state.cost_critic, task,
                                 inner, rng)
                post = make_batch(rollouts(task, policy, res.policy_params, rng, outer.post_rollouts))
                g = fomaml_task_gradient(policy, res, state.lam if constrained else 0.0, task, post,
                                         critic_spec, cost_gamma, outer.meta_gae_lambda)
                if not np.all(np.isfinite(g)):
                    raise FloatingPointError("non-finite task meta-gradient")
            except TASK_FAILURES as exc:
                failures += 1
                if log:
                    log(f"iteration {it}: task {task.task_id} skipped ({exc})")
                continue
            grads.append(g)
            J = float(np.mean(post.discounted(post.rewards, task.gamma)))
            J_C = float(np.mean(post.discounted(post.costs, cost_gamma)))
            task_J.append(J)
            task_J_C.append(J_C)
            kl = float(np.mean(res.trace["kl"]))
            kls.append(kl)
            task_rows.append((task, post, J, J_C, res.lam, kl))
        if failures >= outer.abort_fraction * len(tasks):
            raise MetaTrainingError(f"iteration {it}: {failures} of {len(tasks)} task adaptations failed")

        meta_rng = stream(seed, "meta", it)
        meta_batches = _meta_rollouts(tasks, policy, state.policy_params, meta_rng, outer.meta_rollouts)
        d_mean = _mean_limit(tasks)
        fomaml = np.mean(grads, axis=0)
        # the meta cost critic is refit on the fresh meta-policy data before use
        state.cost_critic = train_meta_cost_critic(critic_spec, state.cost_critic, meta_batches,
                                                   cost_gamma, inner.critic_epochs, inner.critic_lr)
        if constrained:
            eta_term = eta_safety_gradient(policy, state.policy_params, meta_batches, critic_spec,
                                           state.cost_critic, state.eta, cost_gamma,
                                           outer.eta_term_mode)
        else:
            eta_term = np.zeros_like(fomaml)
        direction = fomaml + eta_term
        scale = 1.0
        if outer.max_grad_norm is not None:
            norm = float(np.linalg.norm(direction))
            if norm > outer.max_grad_norm:
                scale = outer.max_grad_norm / norm
        fomaml, eta_term = scale * fomaml, scale * eta_term
        update = outer.meta_lr_policy * (fomaml + eta_term)

        lam_grad = float(np.mean(np.asarray(task_J_C) - np.array([t.cost_limit for t, *_ in task_rows])))
        eta_grad = float(np.mean(initial_state_values(critic_spec, state.cost_critic, meta_batches))
                         - d_mean)
        report = MetaGradientReport(fomaml, eta_term, lam_grad, eta_grad, task_J, task_J_C)
        assert np.array_equal(update, outer.meta_lr_policy * (report.fomaml_term + report.eta_term))
        reports.append(report)

        meta_J = float(np.mean(meta_batches.discounted(meta_batches.rewards, probe.gamma)))
        meta_J_C = float(np.mean(meta_batches.discounted(meta_batches.costs, cost_gamma)))
        agg = metrics_row("meta_train", it, "agg", meta_batches, meta_J, meta_J_C, state.lam,
                          state.eta, float(np.mean(kls)))
        rows.append(agg)
        for task, post, J, J_C, lam_p, kl in task_rows:
            rows.append(metrics_row("meta_train", it, task.task_id, post, J, J_C, lam_p, state.eta, kl))

        state.policy_params = state.policy_params + update
        if constrained and outer.lambda_trainable:
            state.lam = update_meta_lambda(state.lam, task_J_C, [t.cost_limit for t, *_ in task_rows],
                                           outer.meta_lr_lambda)
        if constrained and outer.eta_trainable:
            state.eta = update_eta(state.eta, meta_batches, critic_spec, state.cost_critic, d_mean,
                                   outer.meta_lr_eta)
        state.iteration = it + 1
        if log:
            log(f"iteration {it}: meta return {agg['mean_episode_return']:.3f} "
                f"cost {agg['mean_episode_cost']:.3f} lam {state.lam:.3f} eta {state.eta:.3f}")
    return _checkpoint(state, policy, critic_spec, outer, inner, seed, mode), rows, reports


def _meta_rollouts(tasks, policy, params, rng, n):
    """``n`` meta-policy episodes spread round-robin over ``tasks``."""
    trajs = []
    for k, task in enumerate(tasks):
        count = n // len(tasks) + (1 if k < n % len(tasks) else 0)
        if count:
            trajs += rollouts(task, policy, params, rng, count)
    return make_batch(trajs)


def episodes_per_iteration(inner: InnerLoopConfig, outer: OuterConfig) -> int:
    return outer.B * (inner.adaptation_steps * inner.rollouts_per_step + outer.post_rollouts) \
        + outer.meta_rollouts


def _pretrain_single(split, policy, critic_spec, state, inner, outer, seed, log):
    """Safe-RL training on one task for the environment budget of meta-training."""
    task = sample_tasks(split, 1, [seed, purpose_code("pretrain")])[0]
    steps_per_iter = math.ceil(episodes_per_iteration(inner, outer) / inner.rollouts_per_step)
    chunk = replace(inner, adaptation_steps=steps_per_iter)
    rng = stream(seed, "pretrain", task.task_id)
    reward_critic = None
    rows = []
    for it in range(outer.N):
        res = adapt_task(policy, state.policy_params, state.lam, state.cost_critic, task, chunk, rng,
                         reward_critic=reward_critic)
        rows.append({
            "phase": "meta_train", "iteration": it, "task_id": task.task_id,
            "mean_episode_return": float(res.trace["mean_return"][-1]),
            "mean_episode_cost": float(res.trace["mean_cost"][-1]),
            "J": float(res.trace["J"][-1]), "J_C": float(res.trace["J_C"][-1]),
            "lam": float(res.trace["lam"][-1]), "eta": 0.0, "kl": float(np.mean(res.trace["kl"])),
        })
        state.policy_params, state.lam = res.policy_params, res.lam
        state.cost_critic, reward_critic = res.cost_critic, res.reward_critic
        state.iteration = it + 1
        if log:
            log(f"pretrain chunk {it}: return {rows[-1]['mean_episode_return']:.3f} "
                f"cost {rows[-1]['mean_episode_cost']:.3f} lam {state.lam:.3f}")
    agg = [dict(r, task_id="agg") for r in rows]
    return _checkpoint(state, policy, critic_spec, outer, inner, seed, "pretrain_single"), agg, []


def fine_tune(policy: Policy, start_params, task, inner: InnerLoopConfig, steps: int, rng,
              lam_init=0.0, cost_critic=None):
    """Run ``steps`` safe-RL updates from ``start_params`` on ``task``.

    Returns ``(rows, final_params)`` with ``steps + 1`` rows: row ``k`` holds the
    batch statistics of the policy after ``k`` updates (row 0 evaluates
    ``start_params``) and the KL of the update that produced it.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if policy.obs_dim != task.obs_dim or policy.act_dim != task.act_dim:
        raise ValueError(f"policy shape ({policy.obs_dim} obs, {policy.act_dim} act) does not match "
                         f"task ({task.obs_dim} obs, {task.act_dim} act)")
    spec = critic_spec_for(task, inner)
    params = np.array(start_params, dtype=float)
    lam = float(lam_init)
    reward_critic = init_params(spec, rng)
    cost_critic = init_params(spec, rng) if cost_critic is None else np.array(cost_critic, dtype=float)
    if cost_critic.size != spec.n_params:
        raise ValueError(f"cost critic has {cost_critic.size} parameters, task needs {spec.n_params}")
    cost_gamma = inner.cost_gamma(task.gamma)
    rows, kl = [], 0.0
    for k in range(steps + 1):
        batch = make_batch(rollouts(task, policy, params, rng, inner.rollouts_per_step))
        rows.append({
            "phase": "fine_tune", "iteration": k, "task_id": task.task_id,
            "mean_episode_return": float(np.mean(batch.episode_returns)),
            "mean_episode_cost": float(np.mean(batch.episode_costs)),
            "J": float(np.mean(batch.discounted(batch.rewards, task.gamma))),
            "J_C": float(np.mean(batch.discounted(batch.costs, cost_gamma))),
            "lam": lam, "eta": 0.0, "kl": kl,
        })
        if k == steps:
            break
        reward_critic, cost_critic = fit_critics(batch, spec, reward_critic, cost_critic, task.gamma,
                                                 cost_gamma, inner)
        est = advantages(batch, spec, reward_critic, cost_critic, task.gamma, cost_gamma, inner)
        params, lam, info = inner_update(policy, params, lam, batch, est, task, inner, cost_gamma)
        kl = info.kl
    return rows, params


def policy_from_checkpoint(ckpt: MetaCheckpoint) -> Policy:
    return Policy(MlpSpec(tuple(ckpt.policy_layers), "tanh", ckpt.policy_head))
