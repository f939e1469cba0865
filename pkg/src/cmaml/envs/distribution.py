"""Seeded task distributions and their catalogs.

A catalog is the ordered list of tasks obtained by scanning ``seed_range`` and
keeping the seeds whose layout passes the family's filter (goal bearing arc for
point navigation, a binding constraint for the grid family). Every task is a
pure function of ``(family, difficulty, seed)``.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, replace

import numpy as np

from ..rng import stream
from .point_nav import PointNavParams, PointNavTask, generate_point_nav_layout, goal_bearing_deg
from .tabular import grid_hazard_task, random_grid_layout

FAMILIES = ("tabular", "point_nav")
DIFFICULTIES = ("env1_like", "env2_like")
# (hazards, vases) per difficulty level
OBJECT_COUNTS = {"env1_like": (9, 1), "env2_like": (10, 10)}


@dataclass(frozen=True)
class TaskDistribution:
    """Where tasks come from and how many of them exist.

    ``cost_limit=None`` on the tabular family gives every task its own binding
    limit, ``binding_fraction`` of the way from the smallest achievable cost to
    the cost of the unconstrained optimum. Grid layouts whose hazard-free
    route is more than ``max_detour`` moves longer than the shortest route
    are skipped.
    """

    family: str = "point_nav"
    difficulty: str = "env2_like"
    seed_range: tuple = (0, 300)
    count: int = 100
    holdout: int = 0
    gamma: float = 0.99
    cost_limit: float | None = 5.0
    horizon: int = 80
    arc_deg: float = 140.0
    arc_center_deg: float = 0.0
    binding_fraction: float = 0.3
    min_binding_gap: float = 0.8
    max_detour: int | None = 2
    nav: PointNavParams = PointNavParams()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown task family {self.family!r}")
        if self.difficulty not in DIFFICULTIES:
            raise ValueError(f"unknown difficulty {self.difficulty!r}")
        if self.count < 1 or not 0 <= self.holdout < self.count:
            raise ValueError("need count >= 1 and 0 <= holdout < count")
        if self.cost_limit is not None and self.cost_limit < 0:
            raise ValueError("cost limit must be >= 0")

    def split(self, part: str) -> "TaskSplit":
        if part not in ("all", "train", "heldout"):
            raise ValueError(f"unknown split {part!r}")
        return TaskSplit(self, part)


@dataclass(frozen=True)
class TaskSplit:
    dist: TaskDistribution
    part: str = "all"

    def tasks(self):
        cat = catalog(self.dist)
        n_train = self.dist.count - self.dist.holdout
        if self.part == "train":
            return cat[:n_train]
        if self.part == "heldout":
            return cat[n_train:]
        return cat


def within_arc(bearing_deg, arc_deg, center_deg=0.0):
    off = (bearing_deg - center_deg + 180.0) % 360.0 - 180.0
    return abs(off) <= arc_deg / 2.0


def _grid_distance(start, goal, blocked, size):
    frontier, seen, dist = [tuple(start)], {tuple(start)}, 0
    while frontier:
        if tuple(goal) in frontier:
            return dist
        nxt = []
        for r, c in frontier:
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                cell = (r + dr, c + dc)
                if 0 <= cell[0] < size and 0 <= cell[1] < size and cell not in seen \
                        and cell not in blocked:
                    seen.add(cell)
                    nxt.append(cell)
        frontier, dist = nxt, dist + 1
    return None


def detour_length(start, goal, hazards, size=5):
    """Extra moves a hazard-free route needs over the shortest route (``inf`` if none exists)."""
    free = _grid_distance(start, goal, {tuple(h) for h in hazards}, size)
    return np.inf if free is None else free - _grid_distance(start, goal, set(), size)


def make_task(dist: TaskDistribution, seed: int):
    """The task for one catalog seed, or ``None`` when the seed is filtered out."""
    rng = stream(seed, dist.family, dist.difficulty)
    if dist.family == "point_nav":
        n_haz, n_vase = OBJECT_COUNTS[dist.difficulty]
        params = dist.nav
        start, goal, hazards, vases = generate_point_nav_layout(rng, n_haz, n_vase, params)
        if not within_arc(goal_bearing_deg(start, goal), dist.arc_deg, dist.arc_center_deg):
            return None
        d = 5.0 if dist.cost_limit is None else dist.cost_limit
        return PointNavTask(start, goal, hazards, vases, task_id=seed, gamma=dist.gamma,
                            cost_limit=d, horizon=dist.horizon, params=params,
                            difficulty=dist.difficulty)
    from ..oracle.exact import binding_cost_limit

    start, goal, hazards = random_grid_layout(rng)
    if dist.max_detour is not None and detour_length(start, goal, hazards) > dist.max_detour:
        return None
    task = grid_hazard_task(start, goal, hazards, gamma=dist.gamma, horizon=dist.horizon,
                            task_id=seed)
    d_bind, c_min, c_free = binding_cost_limit(task, dist.binding_fraction)
    if c_free - c_min < dist.min_binding_gap:
        return None
    task.meta.update(c_min=c_min, c_free=c_free)
    return task.with_cost_limit(d_bind if dist.cost_limit is None else dist.cost_limit)


@functools.lru_cache(maxsize=32)
def catalog(dist: TaskDistribution):
    """The first ``dist.count`` accepted tasks in seed order (cached, read-only tuple)."""
    out = []
    for seed in range(*dist.seed_range):
        task = make_task(dist, seed)
        if task is not None:
            out.append(task)
            if len(out) == dist.count:
                return tuple(out)
    raise ValueError(f"seed range {dist.seed_range} yields only {len(out)} tasks, "
                     f"{dist.count} requested")


def sample_tasks(dist, B: int, rng_seed, part: str = "all"):
    """``B`` distinct tasks drawn uniformly from the catalog, deterministic in ``rng_seed``."""
    tasks = (dist if isinstance(dist, TaskSplit) else dist.split(part)).tasks()
    B = int(B)
    if B < 1:
        raise ValueError("B must be >= 1")
    if B > len(tasks):
        raise ValueError(f"cannot draw {B} tasks from a catalog of {len(tasks)}")
    idx = np.random.default_rng(np.random.SeedSequence([int(v) for v in np.atleast_1d(rng_seed)])) \
        .permutation(len(tasks))[:B]
    return [tasks[i] for i in idx]


def task_manifest(tasks) -> str:
    """One line per task: id, family, difficulty and object positions."""
    lines = ["task_id\tfamily\tdifficulty\tcost_limit\tlayout"]
    for t in tasks:
        if t.kind == "point_nav":
            f = t.manifest_fields()
            layout = f"start={f['start']} goal={f['goal']} hazards={f['hazards']} vases={f['vases']}"
            diff = t.difficulty
        else:
            m = t.meta
            layout = (f"start={m['start']} goal={m['goal']} hazards={m['hazards']} "
                      f"size={m['size']} slip={m['slip']}")
            diff = "grid5x5"
        lines.append(f"{t.task_id}\t{t.kind}\t{diff}\t{t.cost_limit!r}\t{layout}")
    return "\n".join(lines) + "\n"


def with_overrides(dist: TaskDistribution, **kw) -> TaskDistribution:
    return replace(dist, **kw)
