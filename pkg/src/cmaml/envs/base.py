"""Task interface, trajectories and batched rollouts."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numkit.optim import NumericError


class CmdpTask:
    """One constrained MDP. Subclasses simulate ``n`` independent copies at once.

    ``reset(rng, n)`` returns an opaque batched state, ``observe(state)`` the
    ``(n, obs_dim)`` observations and ``step(state, action, rng)`` returns
    ``(next_state, reward, cost, done)`` with one entry per copy.
    """

    kind: str = "abstract"
    discrete: bool = False

    def __init__(self, task_id, gamma, cost_limit, horizon):
        if not 0.0 <= gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if cost_limit < 0:
            raise ValueError("cost limit must be >= 0")
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        self.task_id = int(task_id)
        self.gamma = float(gamma)
        self.cost_limit = float(cost_limit)
        self.horizon = int(horizon)

    obs_dim: int
    act_dim: int

    def reset(self, rng, n):
        raise NotImplementedError

    def observe(self, state):
        raise NotImplementedError

    def step(self, state, action, rng):
        raise NotImplementedError

    def take(self, state, idx):
        """Sub-select copies of a batched state."""
        return state[idx]


@dataclass
class Trajectory:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    costs: np.ndarray
    action_log_probs: np.ndarray
    dones: np.ndarray
    truncated: bool = False
    last_state: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.rewards)

    @property
    def episode_return(self) -> float:
        return float(np.sum(self.rewards))

    @property
    def episode_cost(self) -> float:
        return float(np.sum(self.costs))


def episode_return_and_cost(traj: Trajectory, gamma: float):
    """Discounted ``(sum_t gamma^t r_t, sum_t gamma^t c_t)``."""
    T = len(traj.rewards)
    if T == 0:
        return 0.0, 0.0
    disc = gamma ** np.arange(T)
    return float(disc @ traj.rewards), float(disc @ traj.costs)


def rollouts(task: CmdpTask, policy, params, rng, n_episodes=1, max_steps=None):
    """Run ``n_episodes`` episodes in lockstep; finished copies drop out."""
    max_steps = task.horizon if max_steps is None else int(max_steps)
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    n = int(n_episodes)
    state = task.reset(rng, n)
    alive = np.arange(n)
    obs = task.observe(state)
    S = np.zeros((max_steps, n, obs.shape[1]))
    A = None
    R = np.zeros((max_steps, n))
    C = np.zeros((max_steps, n))
    LP = np.zeros((max_steps, n))
    DONE = np.zeros((max_steps, n), dtype=bool)
    lengths = np.zeros(n, dtype=int)
    last = np.zeros((n, obs.shape[1]))
    truncated = np.zeros(n, dtype=bool)
    for t in range(max_steps):
        act, logp = policy.sample(params, obs, rng)
        if not np.all(np.isfinite(act)):
            raise NumericError("policy produced a non-finite action")
        if A is None:
            A = np.zeros((max_steps, n) + np.shape(act)[1:], dtype=np.asarray(act).dtype)
        state, r, c, done = task.step(state, act, rng)
        nxt = task.observe(state)
        S[t, alive], A[t, alive], R[t, alive], C[t, alive] = obs, act, r, c
        LP[t, alive], DONE[t, alive] = logp, done
        lengths[alive] += 1
        last[alive] = nxt
        if t == max_steps - 1:
            truncated[alive[~done]] = True
        keep = ~done
        if not keep.any():
            break
        alive = alive[keep]
        state = task.take(state, keep)
        obs = nxt[keep]
    out = []
    for ep in range(n):
        T = lengths[ep]
        out.append(Trajectory(
            states=S[:T, ep].copy(),
            actions=A[:T, ep].copy(),
            rewards=R[:T, ep].copy(),
            costs=C[:T, ep].copy(),
            action_log_probs=LP[:T, ep].copy(),
            dones=DONE[:T, ep].copy(),
            truncated=bool(truncated[ep]),
            last_state=last[ep].copy(),
        ))
    return out


def rollout(task: CmdpTask, policy, params, rng, max_steps=None) -> Trajectory:
    return rollouts(task, policy, params, rng, 1, max_steps)[0]
