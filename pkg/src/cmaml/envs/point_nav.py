"""Continuous 2-D goal navigation among circular hazards and vases.

A damped double integrator: ``v <- damping * v + accel * clip(a, -1, 1)`` and
``p <- clip(p + v, arena)``. Observations concatenate position, velocity, the
goal-relative vector and two rings of sector proximity readings (hazards,
vases), each ``max(0, 1 - edge_distance / lidar_range)`` per sector.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import CmdpTask

GOAL_BONUS = 10.0


@dataclass(frozen=True)
class PointNavParams:
    arena: tuple = (-2.0, -2.0, 2.0, 2.0)
    goal_radius: float = 0.3
    hazard_radius: float = 0.3
    vase_radius: float = 0.2
    damping: float = 0.8
    accel: float = 0.03
    lidar_sectors: int = 8
    lidar_range: float = 1.5


class PointNavTask(CmdpTask):
    kind = "point_nav"
    discrete = False
    act_dim = 2

    def __init__(self, agent_start, goal, hazards, vases, task_id=0, gamma=0.99, cost_limit=5.0,
                 horizon=80, params: PointNavParams = PointNavParams(), difficulty=""):
        super().__init__(task_id, gamma, cost_limit, horizon)
        self.params = params
        self.agent_start = np.asarray(agent_start, dtype=float)
        self.goal = np.asarray(goal, dtype=float)
        self.hazards = np.asarray(hazards, dtype=float).reshape(-1, 3)
        self.vases = np.asarray(vases, dtype=float).reshape(-1, 3)
        self.difficulty = difficulty
        self._objects = np.vstack([self.hazards, self.vases])
        self.obs_dim = 6 + 2 * params.lidar_sectors

    @property
    def goal_radius(self):
        return self.params.goal_radius

    def reset(self, rng, n):
        state = np.zeros((n, 4))
        state[:, :2] = self.agent_start
        return state

    def _lidar(self, pos, objects):
        K = self.params.lidar_sectors
        out = np.zeros((len(pos), K))
        if len(objects) == 0:
            return out
        dx = objects[None, :, 0] - pos[:, None, 0]
        dy = objects[None, :, 1] - pos[:, None, 1]
        edge = np.maximum(np.hypot(dx, dy) - objects[None, :, 2], 0.0)
        prox = np.clip(1.0 - edge / self.params.lidar_range, 0.0, 1.0)
        sector = (np.floor((np.arctan2(dy, dx) + np.pi) / (2 * np.pi) * K).astype(int)) % K
        rows = np.repeat(np.arange(len(pos)), len(objects))
        np.maximum.at(out, (rows, sector.ravel()), prox.ravel())
        return out

    def observe(self, state):
        state = np.atleast_2d(state)
        pos, vel = state[:, :2], state[:, 2:]
        return np.hstack([pos, vel, self.goal - pos, self._lidar(pos, self.hazards),
                          self._lidar(pos, self.vases)])

    def in_cost_region(self, pos):
        pos = np.atleast_2d(pos)
        if len(self._objects) == 0:
            return np.zeros(len(pos), dtype=bool)
        d = np.hypot(pos[:, None, 0] - self._objects[None, :, 0], pos[:, None, 1] - self._objects[None, :, 1])
        return np.any(d < self._objects[None, :, 2], axis=1)

    def step(self, state, action, rng=None):
        p = self.params
        state = np.atleast_2d(state)
        a = np.clip(np.atleast_2d(action), -1.0, 1.0)
        pos, vel = state[:, :2], state[:, 2:]
        vel_new = p.damping * vel + p.accel * a
        pos_new = pos + vel_new
        lo, hi = np.array(p.arena[:2]), np.array(p.arena[2:])
        hit = (pos_new < lo) | (pos_new > hi)
        pos_new = np.clip(pos_new, lo, hi)
        vel_new = np.where(hit, 0.0, vel_new)
        d_old = np.linalg.norm(self.goal - pos, axis=1)
        d_new = np.linalg.norm(self.goal - pos_new, axis=1)
        done = d_new <= p.goal_radius
        reward = (d_old - d_new) + GOAL_BONUS * done
        cost = self.in_cost_region(pos_new).astype(float)
        return np.hstack([pos_new, vel_new]), reward, cost, done

    def manifest_fields(self):
        fmt = lambda arr: ";".join(",".join(f"{v:.6f}" for v in row) for row in np.atleast_2d(arr))
        return {
            "start": fmt(self.agent_start),
            "goal": fmt(np.append(self.goal, self.goal_radius)),
            "hazards": fmt(self.hazards),
            "vases": fmt(self.vases),
        }


def point_nav_step(task: PointNavTask, state, action):
    """Single-copy step: ``state = [x, y, vx, vy]`` -> ``(next_state, reward, cost, done)``."""
    nxt, r, c, d = task.step(np.asarray(state, dtype=float)[None, :], np.asarray(action, dtype=float)[None, :])
    return nxt[0], float(r[0]), float(c[0]), bool(d[0])


def goal_bearing_deg(start, goal):
    v = np.asarray(goal) - np.asarray(start)
    return float(np.degrees(np.arctan2(v[1], v[0])))


def generate_point_nav_layout(rng, n_hazards, n_vases, params: PointNavParams = PointNavParams(),
                              min_goal_distance=1.5, max_tries=10_000):
    """Random start, goal and obstacles inside the arena.

    The goal centre never lies inside an obstacle and the start keeps a
    clearance of ``0.1`` from every obstacle edge; violating draws are resampled.
    """
    x0, y0, x1, y1 = params.arena
    margin = 0.3

    def point():
        return np.array([rng.uniform(x0 + margin, x1 - margin), rng.uniform(y0 + margin, y1 - margin)])

    start = point()
    for _ in range(max_tries):
        goal = point()
        if np.linalg.norm(goal - start) >= min_goal_distance:
            break
    objects = []
    for radius, count in ((params.hazard_radius, n_hazards), (params.vase_radius, n_vases)):
        placed = 0
        for _ in range(max_tries):
            if placed == count:
                break
            c = point()
            if np.linalg.norm(c - goal) <= radius or np.linalg.norm(c - start) <= radius + 0.1:
                continue
            objects.append((c[0], c[1], radius))
            placed += 1
        if placed < count:
            raise RuntimeError("could not place obstacles")
    objects = np.array(objects).reshape(-1, 3)
    return start, goal, objects[:n_hazards], objects[n_hazards:]
