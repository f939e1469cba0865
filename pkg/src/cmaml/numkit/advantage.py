"""Generalised advantage estimation on single trajectories."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mlp import ShapeError


@dataclass
class AdvantageEstimate:
    reward_advantages: np.ndarray
    cost_advantages: np.ndarray
    reward_returns: np.ndarray
    cost_returns: np.ndarray


def gae(signal, values, gamma, lam, last_value=0.0):
    """Return ``(advantages, returns)`` for one trajectory channel.

    ``values`` are critic predictions at the visited states; ``last_value``
    bootstraps a truncated trajectory (0 for a terminal one).
    ``returns = advantages + values`` are the regression targets of the
    critic. With ``lam = 1`` they are the discounted returns-to-go.
    """
    if not (0.0 <= gamma <= 1.0 and 0.0 <= lam <= 1.0):
        raise ValueError("gamma and lam must lie in [0, 1]")
    signal = np.asarray(signal, dtype=float)
    values = np.asarray(values, dtype=float)
    if signal.shape != values.shape or signal.ndim != 1:
        raise ShapeError(f"signal {signal.shape} and values {values.shape} must be equal-length 1-D")
    T = len(signal)
    next_values = np.append(values[1:], last_value)
    deltas = signal + gamma * next_values - values
    adv = np.empty(T)
    acc = 0.0
    for t in range(T - 1, -1, -1):
        acc = deltas[t] + gamma * lam * acc
        adv[t] = acc
    return adv, adv + values


def discounted_cumsum(x, gamma):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    acc = 0.0
    for t in range(len(x) - 1, -1, -1):
        acc = x[t] + gamma * acc
        out[t] = acc
    return out


def normalize(x, eps=1e-8):
    """Shift to zero mean and scale to unit (population) standard deviation."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return x - x.mean() if x.size else x
    std = x.std()
    return (x - x.mean()) / (std + eps) if std > 0 else x - x.mean()
