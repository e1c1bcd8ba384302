"""Episode simulation of the robot's goal inference against a scripted human.

The simulated human walks the planned (shortcut) path toward the true goal of
each human-assigned subtask, stepping one grid resolution per tick. After
every tick the robot recomputes its belief over the eligible goals, commits
once the maximum belief reaches its confidence threshold, and logs a replan
event whenever the belief argmax changes after commitment.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .geometry import Point2
from .legibility import LegibilityParams, goal_posterior
from .task import Task, eligible_goals, first_valid_order
from .workspace import Workspace, router_for


@dataclass(frozen=True)
class RobotPolicy:
    confidence_threshold: float = 0.8
    replan_on_argmax_change: bool = True

    def __post_init__(self):
        if not 0.5 < self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must be in (0.5, 1]")


@dataclass(frozen=True)
class HumanModel:
    """Path follower: 'optimal' walks the plan, 'noisy' jitters each tick.

    sigma defaults to half the grid resolution when left unset; jittered
    points landing in blocked cells are projected to the nearest unblocked
    cell center.
    """

    kind: str = "optimal"
    sigma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("optimal", "noisy"):
            raise ValueError(f"unknown human model {self.kind!r}")


@dataclass
class StepRecord:
    tick: int
    subtask: str
    position: tuple
    belief: Dict[str, float]
    argmax: str
    committed: bool
    commit_event: bool
    replan_event: bool


@dataclass
class SubtaskResult:
    subtask: str
    goal: str
    steps_to_commit: float  # tick index, or inf when never committed
    commit_correct: Optional[bool]
    replans: int
    ticks: int


@dataclass
class EpisodeLog:
    steps: List[StepRecord] = field(default_factory=list)
    subtasks: List[SubtaskResult] = field(default_factory=list)

    @property
    def replan_count(self) -> int:
        return sum(r.replans for r in self.subtasks)

    @property
    def mean_steps_to_commit(self) -> float:
        vals = [r.steps_to_commit for r in self.subtasks]
        return sum(vals) / len(vals) if vals else 0.0

    @property
    def commit_accuracy(self) -> float:
        if not self.subtasks:
            return 0.0
        correct = sum(1 for r in self.subtasks if r.commit_correct)
        return correct / len(self.subtasks)

    def to_jsonl(self) -> str:
        lines = []
        for s in self.steps:
            lines.append(
                json.dumps(
                    {
                        "tick": s.tick,
                        "subtask": s.subtask,
                        "position": list(s.position),
                        "belief": s.belief,
                        "argmax": s.argmax,
                        "committed": s.committed,
                        "commit_event": s.commit_event,
                        "replan_event": s.replan_event,
                    },
                    sort_keys=True,
                )
            )
        return "\n".join(lines) + "\n"


def _walk_positions(trajectory, step: float) -> list:
    """Positions spaced ``step`` apart along the trajectory, endpoints included."""
    pts = list(trajectory.waypoints)
    if len(pts) == 1:
        return pts
    out = [pts[0]]
    remaining = step
    for p, q in zip(pts, pts[1:]):
        seg = math.hypot(q[0] - p[0], q[1] - p[1])
        pos = 0.0
        while seg - pos > remaining:
            pos += remaining
            t = pos / seg
            out.append(Point2(p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
            remaining = step
        remaining -= seg - pos
    if out[-1].dist(pts[-1]) > 1e-12:
        out.append(pts[-1])
    return out


def _project_unblocked(grid, p: Point2) -> Point2:
    """Nearest unblocked cell center when p falls in a blocked or outside cell."""
    try:
        iy, ix = grid.cell_of(p)
        if not grid.blocked[iy, ix]:
            return p
    except Exception:
        pass
    free = np.argwhere(~grid.blocked)
    centers_x = grid.origin[0] + (free[:, 1] + 0.5) * grid.resolution
    centers_y = grid.origin[1] + (free[:, 0] + 0.5) * grid.resolution
    d2 = (centers_x - p[0]) ** 2 + (centers_y - p[1]) ** 2
    k = int(np.argmin(d2))
    return Point2(float(centers_x[k]), float(centers_y[k]))


def simulate_episode(
    workspace: Workspace,
    task: Task,
    policy: RobotPolicy,
    params: LegibilityParams,
    human_model: HumanModel = HumanModel(),
    rng: Optional[np.random.Generator] = None,
    return_home: bool = True,
) -> EpisodeLog:
    """Run one full task execution and log beliefs, commits and replans.

    Subtasks execute in the first valid order. Robot-assigned subtasks only
    advance the task state; they produce no motion and no inference.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    router = router_for(workspace)
    grid = router.grid
    order = first_valid_order(task)
    sigma = (
        human_model.sigma
        if human_model.sigma is not None
        else 0.5 * grid.resolution
    )
    log = EpisodeLog()
    completed: set = set()
    position = workspace.start
    tick = 0
    for tid in order:
        sub = task.by_id(tid)
        if sub.agent != "human":
            completed.add(tid)
            continue
        goals = eligible_goals(task, completed)
        start = position
        goal_pos = workspace.item_position(sub.goal_item)
        path = router.plan(start, goal_pos)
        walk = _walk_positions(path, grid.resolution)
        if human_model.kind == "noisy":
            noisy = [walk[0]]
            for p in walk[1:-1]:
                jittered = Point2(*(np.asarray(p) + rng.normal(0.0, sigma, 2)))
                noisy.append(_project_unblocked(grid, jittered))
            if len(walk) > 1:
                noisy.append(walk[-1])
            walk = noisy
        else:
            # resolution-spaced samples of a shortcut segment can graze a
            # blocked corner cell the line-of-sight sampling stepped over;
            # the human skirts it, so project such samples out
            walk = [walk[0]] + [_project_unblocked(grid, p) for p in walk[1:]]
        prefix: list = []
        committed_goal = None
        steps_to_commit = math.inf
        replans = 0
        prev_argmax = None
        for local_tick, pos in enumerate(walk):
            prefix.append(pos)
            belief = goal_posterior(workspace, start, prefix, goals, params, router)
            top = belief.argmax()
            commit_event = False
            replan_event = False
            if committed_goal is None and belief.probability(top) >= policy.confidence_threshold:
                committed_goal = top
                steps_to_commit = local_tick
                commit_event = True
            elif (
                committed_goal is not None
                and policy.replan_on_argmax_change
                and prev_argmax is not None
                and top != prev_argmax
            ):
                replan_event = True
                replans += 1
            log.steps.append(
                StepRecord(
                    tick,
                    tid,
                    (pos[0], pos[1]),
                    dict(belief.entries),
                    top,
                    committed_goal is not None,
                    commit_event,
                    replan_event,
                )
            )
            prev_argmax = top
            tick += 1
        log.subtasks.append(
            SubtaskResult(
                tid,
                sub.goal_item,
                steps_to_commit,
                None if committed_goal is None else committed_goal == sub.goal_item,
                replans,
                len(walk),
            )
        )
        completed.add(tid)
        position = workspace.start if return_home else goal_pos
    return log


@dataclass
class MetricComparison:
    name: str
    higher_is_better: bool
    baseline_mean: float
    baseline_std: float
    optimized_mean: float
    optimized_std: float
    wins: int  # seeds where optimized is better
    losses: int
    ties: int
    p_value: float

    @property
    def direction_improved(self) -> bool:
        if self.higher_is_better:
            return self.optimized_mean > self.baseline_mean
        return self.optimized_mean < self.baseline_mean


@dataclass
class ComparisonReport:
    n_seeds: int
    metrics: List[MetricComparison]

    def metric(self, name: str) -> MetricComparison:
        for m in self.metrics:
            if m.name == name:
                return m
        raise KeyError(name)

    def to_json_obj(self) -> dict:
        return {
            "n_seeds": self.n_seeds,
            "metrics": [
                {
                    "name": m.name,
                    "higher_is_better": m.higher_is_better,
                    "baseline": {"mean": m.baseline_mean, "std": m.baseline_std},
                    "optimized": {"mean": m.optimized_mean, "std": m.optimized_std},
                    "wins": m.wins,
                    "losses": m.losses,
                    "ties": m.ties,
                    "sign_test_p": m.p_value,
                }
                for m in self.metrics
            ],
        }

    def to_text(self) -> str:
        header = f"{'metric':<22}{'baseline':>18}{'optimized':>18}{'wins':>6}{'ties':>6}{'p':>10}"
        rows = [header, "-" * len(header)]
        for m in self.metrics:
            rows.append(
                f"{m.name:<22}"
                f"{m.baseline_mean:>10.3f} ±{m.baseline_std:<6.3f}"
                f"{m.optimized_mean:>10.3f} ±{m.optimized_std:<6.3f}"
                f"{m.wins:>6}{m.ties:>6}{m.p_value:>10.2e}"
            )
        return "\n".join(rows)


def _sign_test_p(wins: int, losses: int) -> float:
    """One-sided exact binomial tail P[X >= wins] under p = 0.5; ties dropped."""
    n = wins + losses
    if n == 0:
        return 1.0
    return sum(math.comb(n, k) for k in range(wins, n + 1)) / 2.0**n


def _summary(values) -> tuple:
    arr = [float(v) for v in values]
    mean = sum(arr) / len(arr)
    if any(math.isinf(v) for v in arr):
        return mean, 0.0 if len(set(arr)) == 1 else math.inf
    var = sum((v - mean) ** 2 for v in arr) / len(arr)
    return mean, math.sqrt(var)


def compare_conditions(
    baseline: Workspace,
    optimized: Workspace,
    task: Task,
    policy: RobotPolicy,
    params: LegibilityParams,
    n_seeds: int,
    human_model: HumanModel = HumanModel(),
    return_home: bool = True,
) -> ComparisonReport:
    """Paired episode comparison between two workspace configurations."""
    per_metric = {
        "steps_to_commit": (False, [], []),
        "commit_accuracy": (True, [], []),
        "replan_count": (False, [], []),
    }
    for seed in range(n_seeds):
        for condition, ws in (("baseline", baseline), ("optimized", optimized)):
            log = simulate_episode(
                ws,
                task,
                policy,
                params,
                human_model,
                np.random.default_rng(seed),
                return_home,
            )
            values = {
                "steps_to_commit": log.mean_steps_to_commit,
                "commit_accuracy": log.commit_accuracy,
                "replan_count": float(log.replan_count),
            }
            for name, (_, base_vals, opt_vals) in per_metric.items():
                (base_vals if condition == "baseline" else opt_vals).append(
                    values[name]
                )
    metrics = []
    for name, (higher_better, base_vals, opt_vals) in per_metric.items():
        wins = losses = ties = 0
        for b, o in zip(base_vals, opt_vals):
            better = o > b if higher_better else o < b
            worse = o < b if higher_better else o > b
            if better:
                wins += 1
            elif worse:
                losses += 1
            else:
                ties += 1
        b_mean, b_std = _summary(base_vals)
        o_mean, o_std = _summary(opt_vals)
        metrics.append(
            MetricComparison(
                name,
                higher_better,
                b_mean,
                b_std,
                o_mean,
                o_std,
                wins,
                losses,
                ties,
                _sign_test_p(wins, losses),
            )
        )
    return ComparisonReport(n_seeds, metrics)
