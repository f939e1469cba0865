"""Meta-gradient terms, dual updates and the meta cost critic."""
from __future__ import annotations

import numpy as np

from ..numkit.advantage import discounted_cumsum, gae
from ..numkit.mlp import mlp_forward
from ..numkit.policy import Policy
from ..safe_rl.batch import RolloutBatch, bootstrap_value, fit_critic, make_batch
from ..safe_rl.trpo import update_lagrange


def _as_batch(data):
    return data if isinstance(data, RolloutBatch) else make_batch(data)


def _advantage_channel(batch, signal, values, last_values, gamma, lam, bootstrap=True):
    out = np.empty(len(batch))
    targets = np.empty(len(batch))
    for ep, (a, b) in enumerate(batch.bounds):
        boot = bootstrap_value(last_values[ep], batch.truncated[ep], gamma) if bootstrap else 0.0
        out[a:b], targets[a:b] = gae(signal[a:b], values[a:b], gamma, lam, boot)
    return out, targets


def fomaml_task_gradient(policy: Policy, adaptation, meta_lambda, task, post_rollouts, critic_spec,
                         cost_gamma=None, gae_lambda=1.0):
    """First-order meta-gradient contribution of one adapted task.

    Score-function estimate of the gradient of ``J - meta_lambda * J_C`` at the
    adapted parameters:
    ``(1/N_ep) sum_ep sum_t grad log pi_p(a_t|s_t) (gamma^t A_t - meta_lambda gamma_c^t A_C,t)``
    with advantages from the adapted reward and cost critics (returns-to-go
    minus a baseline when ``gae_lambda = 1``). Returned vector is applied to
    the meta parameters unchanged.
    """
    batch = _as_batch(post_rollouts)
    gamma = task.gamma
    cost_gamma = gamma if cost_gamma is None else cost_gamma
    rv = mlp_forward(critic_spec, adaptation.reward_critic, batch.obs)
    rl = mlp_forward(critic_spec, adaptation.reward_critic, batch.last_obs)
    adv_r, _ = _advantage_channel(batch, batch.rewards, rv, rl, gamma, gae_lambda)
    w = gamma ** batch.t * adv_r
    if meta_lambda != 0.0:
        cv = mlp_forward(critic_spec, adaptation.cost_critic, batch.obs)
        cl = mlp_forward(critic_spec, adaptation.cost_critic, batch.last_obs)
        adv_c, _ = _advantage_channel(batch, batch.costs, cv, cl, cost_gamma, gae_lambda)
        w = w - meta_lambda * cost_gamma ** batch.t * adv_c
    return policy.grad_log_prob(adaptation.policy_params, batch.obs, batch.actions,
                                w / batch.n_episodes)


def cost_gradient_estimate(policy: Policy, params, meta_rollouts, critic_spec, cost_critic,
                           cost_gamma, mode="per_step"):
    """Estimate of the gradient of the meta policy's cost return.

    ``per_step`` weights every score by ``gamma_c^t`` times the critic's
    one-step cost advantage ``c_t + gamma_c V(s_{t+1}) - V(s_t)``;
    ``initial_state`` weights all scores of an episode by the episode's cost
    return minus ``V(s_0)``. The meta cost critic measures cost over the
    episode horizon, so nothing is credited after the last step.
    """
    batch = _as_batch(meta_rollouts)
    v = mlp_forward(critic_spec, cost_critic, batch.obs)
    v_last = mlp_forward(critic_spec, cost_critic, batch.last_obs)
    if mode == "per_step":
        adv, _ = _advantage_channel(batch, batch.costs, v, v_last, cost_gamma, 0.0, bootstrap=False)
        w = cost_gamma ** batch.t * adv
    elif mode == "initial_state":
        starts = np.array([a for a, _ in batch.bounds])
        ret = batch.discounted(batch.costs, cost_gamma)
        w = (ret - v[starts])[batch.episode]
    else:
        raise ValueError(f"unknown eta term mode {mode!r}")
    return policy.grad_log_prob(params, batch.obs, batch.actions, w / batch.n_episodes)


def eta_safety_gradient(policy: Policy, params, meta_rollouts, critic_spec, cost_critic, eta,
                        cost_gamma, mode="per_step"):
    """``-eta`` times the estimated cost-return gradient of the meta policy.

    Added to the ascent direction this lowers the meta policy's own expected
    cost, in proportion to the safety multiplier.
    """
    if eta < 0:
        raise ValueError("eta must be >= 0")
    if eta == 0.0:
        return np.zeros(policy.n_params)
    return -eta * cost_gradient_estimate(policy, params, meta_rollouts, critic_spec, cost_critic,
                                         cost_gamma, mode)


def update_meta_lambda(meta_lambda, task_cost_returns, d, lr):
    """``max(0, lam + lr (mean J_C - d))`` over the adapted tasks' cost returns."""
    J_C = np.asarray(task_cost_returns, dtype=float)
    if J_C.size == 0:
        raise ValueError("need at least one task cost estimate")
    return update_lagrange(meta_lambda, float(np.mean(J_C - np.asarray(d, dtype=float))), 0.0, lr)


def initial_state_values(critic_spec, cost_critic, meta_rollouts):
    batch = _as_batch(meta_rollouts)
    starts = np.array([a for a, _ in batch.bounds], dtype=int)
    return mlp_forward(critic_spec, cost_critic, batch.obs[starts])


def update_eta(eta, meta_rollouts, critic_spec, cost_critic, d, lr):
    """``max(0, eta + lr (mean V_C(s_0) - d))`` with ``s_0`` the rollouts' initial states."""
    if eta < 0:
        raise ValueError("eta must be >= 0")
    if meta_rollouts is None or len(meta_rollouts) == 0:
        raise ValueError("eta update needs at least one meta-policy rollout")
    v0 = initial_state_values(critic_spec, cost_critic, meta_rollouts)
    return max(0.0, float(eta) + float(lr) * (float(np.mean(v0)) - float(np.mean(d))))


def train_meta_cost_critic(critic_spec, cost_critic, meta_rollouts, cost_gamma, epochs=50, lr=1e-2):
    """Regress the critic onto the meta policy's cost returns-to-go within each episode.

    The targets are the meta policy's cost over the rest of its episode, so
    ``V(s_0)`` estimates the episode cost that the meta constraint limits.
    """
    batch = _as_batch(meta_rollouts)
    targets = np.empty(len(batch))
    for a, b in batch.bounds:
        targets[a:b] = discounted_cumsum(batch.costs[a:b], cost_gamma)
    return fit_critic(critic_spec, cost_critic, batch.obs, targets, epochs, lr)
