"""Subtasks, precedence constraints, order enumeration and the task score.

The task-level objective walks every valid execution order of the subtasks,
maintains the completed set and the human's position, and at each
human-assigned step adds the per-goal legibility score for every currently
eligible goal. The reported value is the mean over the walked orders, so
uniform sampling above ``max_orders`` stays an unbiased estimate of the
exhaustive value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional

import numpy as np

from .errors import CyclicPrecedence, UnreachableGoal
from .legibility import (
    LegibilityParams,
    _env_score_from_terms,
    env_legibility,
    step_goal_terms,
)
from .workspace import Workspace, router_for


@dataclass(frozen=True)
class Subtask:
    id: str
    goal_item: str
    agent: str = "human"

    def __post_init__(self):
        if self.agent not in ("human", "robot"):
            raise ValueError(f"unknown agent {self.agent!r}")


@dataclass(frozen=True)
class Task:
    """Subtasks plus precedence edges (first id completes before second)."""

    subtasks: tuple
    precedence: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "subtasks", tuple(self.subtasks))
        object.__setattr__(
            self, "precedence", tuple((a, b) for a, b in self.precedence)
        )
        ids = [t.id for t in self.subtasks]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate subtask ids")
        known = set(ids)
        for a, b in self.precedence:
            if a not in known or b not in known:
                raise ValueError(f"precedence edge ({a!r}, {b!r}) references unknown subtask")

    def by_id(self, subtask_id: str) -> Subtask:
        for t in self.subtasks:
            if t.id == subtask_id:
                return t
        raise KeyError(subtask_id)

    def predecessors(self) -> Dict[str, tuple]:
        preds = {t.id: [] for t in self.subtasks}
        for a, b in self.precedence:
            preds[b].append(a)
        return {k: tuple(v) for k, v in preds.items()}

    def goal_ids(self) -> tuple:
        return tuple(t.goal_item for t in self.subtasks)


@dataclass(frozen=True)
class ScoreConfig:
    """Walk semantics for the task score.

    return_home: after a human subtask the human starts again from the
        workspace start (turn-taking tabletop) instead of the previous goal.
    max_orders: above this many valid orders, sample uniformly instead of
        enumerating; the mean keeps both modes comparable.
    score_current_goal_only: score only the order's current subtask goal
        rather than every eligible goal (alternative objective reading).
    """

    return_home: bool = True
    max_orders: int = 500
    score_current_goal_only: bool = False
    order_seed: int = 0


def _find_cycle(task: Task) -> list:
    adj = {t.id: [] for t in task.subtasks}
    for a, b in task.precedence:
        adj[a].append(b)
    state = {t.id: 0 for t in task.subtasks}  # 0 unvisited, 1 on stack, 2 done
    stack: List[str] = []

    def visit(u):
        state[u] = 1
        stack.append(u)
        for v in adj[u]:
            if state[v] == 1:
                return stack[stack.index(v) :] + [v]
            if state[v] == 0:
                found = visit(v)
                if found:
                    return found
        stack.pop()
        state[u] = 2
        return None

    for t in task.subtasks:
        if state[t.id] == 0:
            found = visit(t.id)
            if found:
                return found
    return []


def check_acyclic(task: Task) -> None:
    cycle = _find_cycle(task)
    if cycle:
        raise CyclicPrecedence(cycle)


@lru_cache(maxsize=128)
def count_orders(task: Task) -> int:
    """Number of valid execution orders (linear extensions)."""
    check_acyclic(task)
    ids = [t.id for t in task.subtasks]
    preds = task.predecessors()
    memo: Dict[frozenset, int] = {}

    def rec(completed: frozenset) -> int:
        if len(completed) == len(ids):
            return 1
        cached = memo.get(completed)
        if cached is not None:
            return cached
        total = 0
        for tid in ids:
            if tid not in completed and all(p in completed for p in preds[tid]):
                total += rec(completed | {tid})
        memo[completed] = total
        return total

    return rec(frozenset())


@lru_cache(maxsize=64)
def _all_orders_cached(task: Task) -> tuple:
    return tuple(_enumerate_orders(task))


def _enumerate_orders(task: Task, limit: Optional[int] = None) -> list:
    ids = [t.id for t in task.subtasks]
    preds = task.predecessors()
    orders: List[tuple] = []
    order: List[str] = []
    completed = set()

    def rec():
        if limit is not None and len(orders) >= limit:
            return
        if len(order) == len(ids):
            orders.append(tuple(order))
            return
        for tid in ids:
            if tid not in completed and all(p in completed for p in preds[tid]):
                order.append(tid)
                completed.add(tid)
                rec()
                order.pop()
                completed.remove(tid)

    rec()
    return orders


def _sample_order(task: Task, rng: np.random.Generator, counts: Dict[frozenset, int], preds) -> tuple:
    ids = [t.id for t in task.subtasks]

    def remaining(completed: frozenset) -> int:
        if len(completed) == len(ids):
            return 1
        cached = counts.get(completed)
        if cached is not None:
            return cached
        total = 0
        for tid in ids:
            if tid not in completed and all(p in completed for p in preds[tid]):
                total += remaining(completed | {tid})
        counts[completed] = total
        return total

    order = []
    completed: frozenset = frozenset()
    while len(order) < len(ids):
        eligible = [
            tid
            for tid in ids
            if tid not in completed and all(p in completed for p in preds[tid])
        ]
        weights = np.array(
            [remaining(completed | {tid}) for tid in eligible], dtype=float
        )
        pick = eligible[int(rng.choice(len(eligible), p=weights / weights.sum()))]
        order.append(pick)
        completed = completed | {pick}
    return tuple(order)


def valid_orders(
    task: Task, max_orders: int, rng: Optional[np.random.Generator] = None
) -> list:
    """All valid orders when there are at most max_orders of them.

    Otherwise returns max_orders orders drawn uniformly at random (with
    replacement) from the set of valid orders, using the provided generator.
    """
    check_acyclic(task)
    total = count_orders(task)
    if total <= max_orders:
        return list(_all_orders_cached(task))
    rng = rng if rng is not None else np.random.default_rng(0)
    counts: Dict[frozenset, int] = {}
    preds = task.predecessors()
    return [_sample_order(task, rng, counts, preds) for _ in range(max_orders)]


def first_valid_order(task: Task) -> tuple:
    """Deterministic valid order: greedy by declaration index."""
    check_acyclic(task)
    return _enumerate_orders(task, limit=1)[0]


def eligible_goals(task: Task, completed) -> tuple:
    """Goals of unfinished subtasks whose predecessors are all completed."""
    completed = set(completed)
    preds = task.predecessors()
    goals = []
    for t in task.subtasks:
        if t.id in completed:
            continue
        if all(p in completed for p in preds[t.id]):
            if t.goal_item not in goals:
                goals.append(t.goal_item)
    return tuple(goals)


@dataclass
class StepScore:
    subtask: str
    agent: str
    start: tuple
    goals: tuple
    value: float


@dataclass
class OrderScore:
    order: tuple
    steps: list
    total: float


@dataclass
class ScoreBreakdown:
    total: float
    orders: list
    order_count: int
    sampled: bool

    def step_sum_check(self) -> float:
        return sum(o.total for o in self.orders) / len(self.orders)


def score_task(
    workspace: Workspace,
    task: Task,
    params: LegibilityParams,
    config: ScoreConfig,
    step_cache: Optional[dict] = None,
) -> ScoreBreakdown:
    """Task-level legibility with per-order and per-step detail.

    ``step_cache`` may be shared across calls to reuse per-step scores between
    workspaces that differ only in items not present in a step's goal set;
    keys carry the grid identity and the exact goal positions.
    """
    router = router_for(workspace)
    start = workspace.start
    positions = {g: workspace.item_position(g) for g in set(task.goal_ids())}
    for g, pos in positions.items():
        if not router.reachable(start, pos):
            raise UnreachableGoal(f"goal {g!r} unreachable from start")
    if not config.return_home:
        for g1, p1 in positions.items():
            for g2, p2 in positions.items():
                if g1 < g2 and not router.reachable(p1, p2):
                    raise UnreachableGoal(f"goal {g2!r} unreachable from {g1!r}")

    total_orders = count_orders(task)
    sampled = total_orders > config.max_orders
    rng = np.random.default_rng(config.order_seed)
    orders = valid_orders(task, config.max_orders, rng)

    preds = task.predecessors()
    subtask_by_id = {t.id: t for t in task.subtasks}
    eligible_memo: Dict[frozenset, tuple] = {}

    def eligible(completed_fs: frozenset) -> tuple:
        got = eligible_memo.get(completed_fs)
        if got is None:
            goals = []
            for t in task.subtasks:
                if t.id in completed_fs:
                    continue
                if all(p in completed_fs for p in preds[t.id]):
                    if t.goal_item not in goals:
                        goals.append(t.goal_item)
            got = tuple(goals)
            eligible_memo[completed_fs] = got
        return got

    cache = step_cache if step_cache is not None else {}
    local: Dict[tuple, float] = {}  # per-call fast path; keys skip positions

    def step_value(position, goals, current_goal) -> float:
        current = current_goal if config.score_current_goal_only else None
        local_key = (position, goals, current)
        value = local.get(local_key)
        if value is not None:
            return value
        key = (
            router.uid,
            position,
            tuple((g, positions[g]) for g in goals),
            current,
        )
        value = cache.get(key)
        if value is None:
            targets = (current_goal,) if config.score_current_goal_only else goals
            value = sum(
                env_legibility(workspace, position, g, goals, params, router)
                for g in targets
            )
            cache[key] = value
        local[local_key] = value
        return value

    order_scores = []
    for order in orders:
        completed_fs: frozenset = frozenset()
        position = start
        steps = []
        order_total = 0.0
        for tid in order:
            sub = subtask_by_id[tid]
            goals = eligible(completed_fs)
            if sub.agent == "human":
                value = step_value(position, goals, sub.goal_item)
                steps.append(
                    StepScore(tid, sub.agent, tuple(position), goals, value)
                )
                order_total += value
                position = start if config.return_home else positions[sub.goal_item]
            else:
                steps.append(StepScore(tid, sub.agent, tuple(position), goals, 0.0))
            completed_fs = completed_fs | {tid}
        order_scores.append(OrderScore(order, steps, order_total))

    total = sum(o.total for o in order_scores) / len(order_scores)
    return ScoreBreakdown(total, order_scores, total_orders, sampled)


@lru_cache(maxsize=32)
def _walk_plan(
    task: Task, return_home: bool, score_current: bool, max_orders: int, order_seed: int
) -> tuple:
    """(order count, ((origin goal or None, eligible goals, target), count)...).

    The walk over orders only depends on the task structure, never on item
    positions, so the per-step multiset is computed once per configuration:
    the task score is then a weighted sum of per-step values.
    """
    rng = np.random.default_rng(order_seed)
    orders = valid_orders(task, max_orders, rng)
    preds = task.predecessors()
    subtask_by_id = {t.id: t for t in task.subtasks}
    eligible_memo: Dict[frozenset, tuple] = {}

    def eligible(completed_fs: frozenset) -> tuple:
        got = eligible_memo.get(completed_fs)
        if got is None:
            goals = []
            for t in task.subtasks:
                if t.id in completed_fs:
                    continue
                if all(p in completed_fs for p in preds[t.id]):
                    if t.goal_item not in goals:
                        goals.append(t.goal_item)
            got = tuple(goals)
            eligible_memo[completed_fs] = got
        return got

    counts: Dict[tuple, int] = {}
    for order in orders:
        completed_fs: frozenset = frozenset()
        origin = None  # None means the workspace start
        for tid in order:
            sub = subtask_by_id[tid]
            if sub.agent == "human":
                key = (
                    origin,
                    eligible(completed_fs),
                    sub.goal_item if score_current else None,
                )
                counts[key] = counts.get(key, 0) + 1
                origin = None if return_home else sub.goal_item
            completed_fs = completed_fs | {tid}
    return (len(orders), tuple(counts.items()))


def task_legibility(
    workspace: Workspace,
    task: Task,
    params: LegibilityParams,
    config: ScoreConfig,
    step_cache: Optional[dict] = None,
    plan: Optional[tuple] = None,
) -> float:
    """Mean over valid orders of the summed per-step legibility contributions.

    Equivalent to ``score_task(...).total`` but collapses the order walk to a
    weighted sum over the distinct (origin, eligible set) steps. ``plan`` may
    carry a precomputed ``_walk_plan`` result for repeated evaluations.
    """
    router = router_for(workspace)
    start = workspace.start
    positions = {g: workspace.item_position(g) for g in set(task.goal_ids())}
    n_orders, steps = plan if plan is not None else _walk_plan(
        task,
        config.return_home,
        config.score_current_goal_only,
        config.max_orders,
        config.order_seed,
    )
    cache = step_cache if step_cache is not None else {}
    checkpoints = np.asarray(params.checkpoints)
    total = 0.0
    for (origin, goals, current), count in steps:
        position = start if origin is None else positions[origin]
        key = (
            router.uid,
            position,
            tuple((g, positions[g]) for g in goals),
            current,
        )
        value = cache.get(key)
        if value is None:
            resolved = [(g, positions[g]) for g in goals]
            terms = step_goal_terms(workspace, router, position, resolved)
            targets = (current,) if current is not None else goals
            value = 0.0
            for target in targets:
                value += _env_score_from_terms(
                    workspace,
                    router,
                    terms,
                    goals.index(target),
                    positions[target],
                    params,
                    checkpoints,
                )
            cache[key] = value
        total += count * value
    return total / n_orders
