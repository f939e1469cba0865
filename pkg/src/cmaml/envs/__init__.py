"""CMDP tasks: the tabular grid-hazard family and 2-D point navigation."""
from .base import CmdpTask, Trajectory, episode_return_and_cost, rollout, rollouts
from .distribution import (
    OBJECT_COUNTS,
    TaskDistribution,
    TaskSplit,
    catalog,
    make_task,
    sample_tasks,
    task_manifest,
)
from .point_nav import GOAL_BONUS, PointNavParams, PointNavTask, goal_bearing_deg, point_nav_step
from .tabular import TabularCmdp, grid_hazard_task, random_grid_layout

__all__ = [
    "CmdpTask", "Trajectory", "episode_return_and_cost", "rollout", "rollouts",
    "OBJECT_COUNTS", "TaskDistribution", "TaskSplit", "catalog", "make_task", "sample_tasks",
    "task_manifest", "GOAL_BONUS", "PointNavParams", "PointNavTask", "goal_bearing_deg",
    "point_nav_step", "TabularCmdp", "grid_hazard_task", "random_grid_layout",
]
