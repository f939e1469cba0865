"""Finite CMDPs given by explicit tensors, and the grid-hazard family."""
from __future__ import annotations

import numpy as np

from .base import CmdpTask

# up, down, left, right as (row, col) offsets
MOVES = np.array([[-1, 0], [1, 0], [0, -1], [0, 1]])


class TabularCmdp(CmdpTask):
    """``M[s, a, s']`` transitions, ``r``/``c`` on ``(s, a, s')`` and start distribution ``mu``.

    States listed in ``terminal`` end an episode on entry; they must be
    absorbing with zero reward and cost so that truncated rollouts and the
    infinite-horizon quantities of :mod:`cmaml.oracle` agree.
    """

    kind = "tabular"
    discrete = True

    def __init__(self, M, r, c, mu, gamma, cost_limit=0.0, horizon=100, task_id=0,
                 terminal=(), meta=None):
        super().__init__(task_id, gamma, cost_limit, horizon)
        self.M = np.asarray(M, dtype=float)
        self.r = np.asarray(r, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.mu = np.asarray(mu, dtype=float)
        S, A, S2 = self.M.shape
        if S != S2 or self.r.shape != self.M.shape or self.c.shape != self.M.shape:
            raise ValueError("M, r and c must all have shape (S, A, S)")
        if self.mu.shape != (S,):
            raise ValueError("mu must have shape (S,)")
        if np.any(self.M < 0) or np.any(self.M > 1) or np.any(np.abs(self.M.sum(axis=2) - 1) > 1e-9):
            raise ValueError("transition rows must be probability vectors")
        if np.any(self.mu < 0) or abs(self.mu.sum() - 1) > 1e-9:
            raise ValueError("mu must be a probability vector")
        if np.any(self.c < 0):
            raise ValueError("costs must be nonnegative")
        self.terminal = np.zeros(S, dtype=bool)
        self.terminal[list(terminal)] = True
        self._cum = np.cumsum(self.M, axis=2)
        self._cum[:, :, -1] = 1.0
        self.meta = dict(meta or {})

    @property
    def state_count(self):
        return self.M.shape[0]

    @property
    def action_count(self):
        return self.M.shape[1]

    @property
    def obs_dim(self):
        return self.state_count

    @property
    def act_dim(self):
        return self.action_count

    def expected_reward(self):
        return np.einsum("sap,sap->sa", self.M, self.r)

    def expected_cost(self):
        return np.einsum("sap,sap->sa", self.M, self.c)

    def reset(self, rng, n):
        cum = np.cumsum(self.mu)
        cum[-1] = 1.0
        return np.searchsorted(cum, rng.random(n), side="right").astype(int)

    def observe(self, state):
        return np.eye(self.state_count)[state]

    def step(self, state, action, rng):
        action = np.asarray(action, dtype=int)
        u = rng.random(len(state))
        cum = self._cum[state, action]
        nxt = np.minimum((cum < u[:, None]).sum(axis=1), self.state_count - 1)
        reward = self.r[state, action, nxt]
        cost = self.c[state, action, nxt]
        return nxt, reward, cost, self.terminal[nxt]

    def with_cost_limit(self, d):
        return TabularCmdp(self.M, self.r, self.c, self.mu, self.gamma, d, self.horizon,
                           self.task_id, np.flatnonzero(self.terminal), self.meta)


def grid_hazard_task(start, goal, hazards, size=5, slip=0.1, gamma=0.95, cost_limit=0.0,
                     horizon=60, task_id=0):
    """Grid world with four moves; a slip replaces the action by a uniform random one.

    Entering the goal pays 1 and ends the episode (the goal is absorbing);
    every step that lands in a hazard cell costs 1. Moves into walls stay put.
    """
    S = size * size
    idx = lambda rc: int(rc[0]) * size + int(rc[1])
    g = idx(goal)
    haz = sorted({idx(h) for h in hazards})
    if g in haz or idx(start) == g:
        raise ValueError("goal must differ from start and hazards")
    M = np.zeros((S, 4, S))
    for s in range(S):
        if s == g:
            M[s, :, s] = 1.0
            continue
        rc = np.array(divmod(s, size))
        dest = []
        for a in range(4):
            nrc = np.clip(rc + MOVES[a], 0, size - 1)
            dest.append(idx(nrc))
        for a in range(4):
            M[s, a, dest[a]] += 1.0 - slip
            for b in range(4):
                M[s, a, dest[b]] += slip / 4.0
    r = np.zeros((S, 4, S))
    c = np.zeros((S, 4, S))
    not_goal = np.arange(S) != g
    r[not_goal, :, g] = 1.0
    for h in haz:
        c[not_goal, :, h] = 1.0
    mu = np.zeros(S)
    mu[idx(start)] = 1.0
    meta = dict(start=tuple(int(v) for v in start), goal=tuple(int(v) for v in goal),
                hazards=[divmod(h, size) for h in haz], size=size, slip=slip)
    return TabularCmdp(M, r, c, mu, gamma, cost_limit, horizon, task_id, terminal=[g], meta=meta)


def random_grid_layout(rng, size=5):
    """A start/goal pair on opposite sides of a partial wall of 2-4 hazard cells.

    The wall sits in a random interior row (or column, after transposition)
    and covers the start's column, so the short route pays cost and the
    cost-free route detours through a gap.
    """
    wall = int(rng.integers(1, size - 1))
    start_col = int(rng.integers(0, size))
    goal_col = int(np.clip(start_col + rng.integers(-1, 2), 0, size - 1))
    n_haz = int(rng.integers(2, 5))
    cols = {start_col, goal_col}
    order = sorted(range(size), key=lambda j: (abs(j - start_col), rng.random()))
    for j in order:
        if len(cols) >= n_haz:
            break
        cols.add(j)
    cols = sorted(cols)[:n_haz] if len(cols) > n_haz else sorted(cols)
    start_row = int(rng.integers(0, wall))
    goal_row = int(rng.integers(wall + 1, size))
    start, goal = (start_row, start_col), (goal_row, goal_col)
    hazards = [(wall, j) for j in cols]
    if rng.random() < 0.5:
        start, goal = start[::-1], goal[::-1]
        hazards = [h[::-1] for h in hazards]
    if rng.random() < 0.5:
        start, goal = goal, start
    return start, goal, hazards
