"""Stochastic policies built on :mod:`cmaml.numkit.mlp`."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import distributions as D
from .mlp import MlpSpec, init_params, mlp_backward, mlp_forward, mlp_jvp, raw_forward, unpack


@dataclass(frozen=True)
class Policy:
    """A parameter-free description of a policy network; parameters are passed explicitly."""

    spec: MlpSpec

    @property
    def discrete(self) -> bool:
        return self.spec.output_head == "categorical_policy"

    @property
    def n_params(self) -> int:
        return self.spec.n_params

    @property
    def obs_dim(self) -> int:
        return self.spec.input_dim

    @property
    def act_dim(self) -> int:
        return self.spec.output_dim

    def init(self, rng, output_scale=0.01, log_std_init=-0.5):
        return init_params(self.spec, rng, output_scale=output_scale, log_std_init=log_std_init)

    def dist(self, params, obs):
        """Gaussian output or ``(n, A)`` logits for a batch of observations."""
        if self.discrete:
            return raw_forward(self.spec, params, obs)
        out = mlp_forward(self.spec, params, np.atleast_2d(obs))
        return out

    def log_prob(self, params, obs, actions):
        d = self.dist(params, obs)
        if self.discrete:
            return D.categorical_log_prob(d, actions)
        return D.gaussian_log_prob(d, np.atleast_2d(actions))

    def sample(self, params, obs, rng):
        d = self.dist(params, obs)
        if self.discrete:
            a = D.categorical_sample(d, rng)
            return a, D.categorical_log_prob(d, a)
        a = D.gaussian_sample(d, rng)
        return a, D.gaussian_log_prob(d, a)

    def grad_log_prob(self, params, obs, actions, weights):
        """Gradient of ``sum_i w_i log pi(a_i | s_i)`` w.r.t. the flat parameters."""
        d = self.dist(params, obs)
        if self.discrete:
            g = D.categorical_log_prob_grad(d, actions, weights)
        else:
            g = D.gaussian_log_prob_grad(d, np.atleast_2d(actions), weights)
        return mlp_backward(self.spec, params, np.atleast_2d(obs), g)

    def kl(self, old_dist, params, obs):
        """Per-state ``KL(old || new)`` with the new distribution given by ``params``."""
        new = self.dist(params, obs)
        if self.discrete:
            return D.categorical_kl(old_dist, new)
        return D.gaussian_kl(old_dist, new)

    def mean_kl(self, old_dist, params, obs) -> float:
        return float(np.mean(self.kl(old_dist, params, obs)))

    def grad_mean_kl(self, old_dist, params, obs):
        """Gradient of the mean ``KL(old || new)`` w.r.t. the new parameters."""
        obs = np.atleast_2d(obs)
        new = self.dist(params, obs)
        w = np.full(len(obs), 1.0 / len(obs))
        if self.discrete:
            g = D.categorical_kl_grad_q(old_dist, new, w)
        else:
            g = D.gaussian_kl_grad_q(old_dist, new, w)
        return mlp_backward(self.spec, params, obs, g)


def fisher_vector_product(policy: Policy, params, states, v, damping):
    """``(F + damping I) v`` with ``F`` the Hessian of the mean KL at coinciding policies.

    At ``new == old`` the KL Hessian equals ``J^T M J`` where ``J`` is the
    Jacobian of the distribution parameters and ``M`` the Fisher metric of the
    distribution family: ``diag(1/sigma^2)`` on means and ``2 I`` on
    log-stds for Gaussians, ``diag(p) - p p^T`` on logits for categoricals.
    """
    if damping <= 0:
        raise ValueError("damping must be positive")
    states = np.atleast_2d(states)
    n = len(states)
    v = np.asarray(v, dtype=float)
    spec = policy.spec
    jv = mlp_jvp(spec, params, states, v)
    if policy.discrete:
        p = D.softmax(raw_forward(spec, params, states))
        mjv = p * jv - p * np.sum(p * jv, axis=1, keepdims=True)
        fv = mlp_backward(spec, params, states, mjv / n)
    else:
        _, raw_log_std = unpack(spec, params)
        lo, hi = spec.log_std_bounds
        inside = ((raw_log_std >= lo) & (raw_log_std <= hi)).astype(float)
        log_std = np.clip(raw_log_std, lo, hi)
        _, v_log_std = unpack(spec, v)
        g_mean = jv * np.exp(-2.0 * log_std) / n
        g_log_std = 2.0 * inside * v_log_std
        fv = mlp_backward(spec, params, states, D.GaussianPolicyOut(g_mean, g_log_std))
    return fv + damping * v
