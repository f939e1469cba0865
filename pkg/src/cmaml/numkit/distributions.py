"""Diagonal Gaussian and categorical action distributions.

Functions accept single outputs or batches; batched inputs carry a leading
sample axis on ``mean``/``logits`` while the Gaussian ``log_std`` is shared.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class GaussianPolicyOut:
    mean: np.ndarray
    log_std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.log_std = np.asarray(self.log_std, dtype=float)

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]


def gaussian_log_prob(out: GaussianPolicyOut, action):
    """Exact diagonal-Gaussian log density (per row when batched)."""
    action = np.asarray(action, dtype=float)
    if action.shape[-1] != out.dim:
        raise ValueError(f"action dim {action.shape[-1]} != policy dim {out.dim}")
    z = (action - out.mean) * np.exp(-out.log_std)
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(out.log_std) - 0.5 * out.dim * LOG_2PI


def gaussian_log_prob_grad(out: GaussianPolicyOut, action, weights=None):
    """Gradient of ``sum_i w_i log p(a_i)`` w.r.t. mean (per row) and log_std (summed)."""
    action = np.atleast_2d(np.asarray(action, dtype=float))
    mean = np.atleast_2d(out.mean)
    w = np.ones(len(action)) if weights is None else np.asarray(weights, dtype=float)
    inv_var = np.exp(-2.0 * out.log_std)
    diff = action - mean
    g_mean = w[:, None] * diff * inv_var
    g_log_std = np.sum(w[:, None] * (diff * diff * inv_var - 1.0), axis=0)
    return GaussianPolicyOut(g_mean, g_log_std)


def gaussian_kl(p: GaussianPolicyOut, q: GaussianPolicyOut):
    """Closed-form ``KL(p || q)`` for diagonal Gaussians (per row when batched)."""
    if p.dim != q.dim:
        raise ValueError("dimension mismatch")
    var_p = np.exp(2.0 * p.log_std)
    var_q = np.exp(2.0 * q.log_std)
    diff = p.mean - q.mean
    terms = q.log_std - p.log_std + (var_p + diff * diff) / (2.0 * var_q) - 0.5
    return np.maximum(np.sum(terms, axis=-1), 0.0)


def gaussian_kl_grad_q(p: GaussianPolicyOut, q: GaussianPolicyOut, weights=None):
    """Gradient of ``sum_i w_i KL(p_i || q_i)`` w.r.t. q's mean (per row) and log_std."""
    mean_p = np.atleast_2d(p.mean)
    mean_q = np.atleast_2d(q.mean)
    w = np.ones(len(mean_q)) if weights is None else np.asarray(weights, dtype=float)
    var_p = np.exp(2.0 * p.log_std)
    inv_var_q = np.exp(-2.0 * q.log_std)
    diff = mean_q - mean_p
    g_mean = w[:, None] * diff * inv_var_q
    g_log_std = np.sum(w[:, None] * (1.0 - (var_p + diff * diff) * inv_var_q), axis=0)
    return GaussianPolicyOut(g_mean, g_log_std)


def gaussian_sample(out: GaussianPolicyOut, rng: np.random.Generator):
    return out.mean + np.exp(out.log_std) * rng.standard_normal(out.mean.shape)


def log_softmax(logits):
    logits = np.asarray(logits, dtype=float)
    m = np.max(logits, axis=-1, keepdims=True)
    z = logits - m
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def softmax(logits):
    return np.exp(log_softmax(logits))


def categorical_log_prob(logits, action):
    lp = log_softmax(np.atleast_2d(logits))
    action = np.atleast_1d(np.asarray(action, dtype=int))
    return lp[np.arange(len(action)), action]


def categorical_log_prob_grad(logits, action, weights=None):
    """Gradient of ``sum_i w_i log p_i(a_i)`` w.r.t. the logits, shape ``(n, A)``."""
    p = softmax(np.atleast_2d(logits))
    action = np.atleast_1d(np.asarray(action, dtype=int))
    w = np.ones(len(action)) if weights is None else np.asarray(weights, dtype=float)
    g = -p
    g[np.arange(len(action)), action] += 1.0
    return w[:, None] * g


def categorical_kl(p_logits, q_logits):
    lp = log_softmax(p_logits)
    lq = log_softmax(q_logits)
    return np.maximum(np.sum(np.exp(lp) * (lp - lq), axis=-1), 0.0)


def categorical_kl_grad_q(p_logits, q_logits, weights=None):
    p = softmax(np.atleast_2d(p_logits))
    q = softmax(np.atleast_2d(q_logits))
    w = np.ones(len(p)) if weights is None else np.asarray(weights, dtype=float)
    return w[:, None] * (q - p)


def categorical_sample(logits, rng: np.random.Generator):
    p = softmax(np.atleast_2d(logits))
    u = rng.random(len(p))
    idx = (np.cumsum(p, axis=1) < u[:, None]).sum(axis=1)
    return np.minimum(idx, p.shape[1] - 1)
