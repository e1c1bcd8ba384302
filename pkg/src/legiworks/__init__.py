"""Legibility-optimized workspace layout for human-robot collaboration.

A workspace configuration (goal items plus virtual obstacles) is scored by
how early and how confidently an observer can infer which goal a human is
moving toward, aggregated over every valid execution order of a task. An
archive-based quality-diversity search explores configurations along
interpretable feature dimensions, and a simulator measures the downstream
effect on robot commitment speed and replanning.
"""

__version__ = "0.1.0"

from .errors import EngineError
from .geometry import ConvexPolygon, Disc, Point2, convex_hull, merge_overlapping, polygons_overlap
from .legibility import Belief, LegibilityParams, env_legibility, goal_posterior, prediction_margin
from .planner import OccupancyGrid, Trajectory, grid_cost, observed_cost, path_cost, plan_path, rasterize
from .qd import Archive, MeasureDescriptor, QDConfig, map_elites, measure
from .sim import HumanModel, RobotPolicy, compare_conditions, simulate_episode
from .task import ScoreConfig, Subtask, Task, eligible_goals, task_legibility, valid_orders
from .workspace import Item, Workspace

__all__ = [
    "__version__",
    "EngineError",
    "Point2",
    "ConvexPolygon",
    "Disc",
    "convex_hull",
    "polygons_overlap",
    "merge_overlapping",
    "OccupancyGrid",
    "Trajectory",
    "rasterize",
    "plan_path",
    "path_cost",
    "grid_cost",
    "observed_cost",
    "LegibilityParams",
    "Belief",
    "goal_posterior",
    "prediction_margin",
    "env_legibility",
    "Subtask",
    "Task",
    "ScoreConfig",
    "valid_orders",
    "eligible_goals",
    "task_legibility",
    "MeasureDescriptor",
    "QDConfig",
    "Archive",
    "measure",
    "map_elites",
    "RobotPolicy",
    "HumanModel",
    "simulate_episode",
    "compare_conditions",
    "Item",
    "Workspace",
]
