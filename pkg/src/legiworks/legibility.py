"""Goal inference from partial motion and the per-goal legibility score.

The belief over goals compares how efficient the observed motion is for each
candidate: the unnormalized weight of goal G is

    exp(-beta * (C(observed) + C*(Q -> G) - C*(S -> G)) / diagonal)

where C* is the optimal raw grid cost, Q the last observed point and the
division by the workspace diagonal keeps the softmax scale-free across
tabletop and room-sized layouts. Weights are normalized explicitly over the
eligible goal set.

The checkpoint scorer is the inner loop of the workspace optimizer, so it is
compiled: per-goal distance fields and start costs are hoisted once, and each
checkpoint only interpolates the approach trajectory and reads two field
entries per goal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from .errors import EmptyGoalSet, UnreachableGoal
from .geometry import as_point
from .planner import GridRouter, observed_cost
from .workspace import Workspace, router_for

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False


@dataclass(frozen=True)
class LegibilityParams:
    """Tuning knobs for goal inference and scoring.

    beta: inverse temperature applied to diagonal-normalized costs.
    penalty_c: fixed penalty when the most likely goal is not the true one.
    checkpoints: trajectory-cost fractions at which predictions are scored.
    """

    beta: float = 5.0
    penalty_c: float = 1.0
    checkpoints: tuple = (0.25, 0.5, 0.75)

    def __post_init__(self):
        object.__setattr__(self, "checkpoints", tuple(self.checkpoints))
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        if self.penalty_c < 0:
            raise ValueError("penalty_c must be >= 0")
        prev = 0.0
        for f in self.checkpoints:
            if not (prev < f <= 1.0):
                raise ValueError("checkpoints must be strictly increasing in (0, 1]")
            prev = f


@dataclass(frozen=True)
class Belief:
    """Normalized probability distribution over goal identifiers."""

    entries: Dict[str, float]

    def probability(self, goal: str) -> float:
        return self.entries[goal]

    def argmax(self) -> str:
        """Most likely goal; exact ties resolve to the smallest identifier."""
        best = max(self.entries.values())
        return min(g for g, p in self.entries.items() if p == best)

    def top_two(self) -> tuple:
        probs = sorted(self.entries.values())
        return (probs[-1], probs[-2]) if len(probs) >= 2 else (probs[-1], None)


def prediction_margin(belief: Belief) -> float:
    """Difference between the two highest probabilities; 1.0 for a singleton."""
    top, second = belief.top_two()
    if second is None:
        return 1.0
    return top - second


def posterior_from_costs(
    cost_observed: float,
    goal_costs: Dict[str, tuple],
    beta: float,
    cost_scale: float,
) -> Belief:
    """Normalize exp(-beta * scaled cost excess) over the goal set.

    goal_costs maps goal id to (cost Q->G, cost S->G). Scaling all costs by k
    while scaling beta by 1/k leaves the result unchanged.
    """
    if not goal_costs:
        raise EmptyGoalSet("no goals to infer over")
    weights = {}
    for goal, (c_qg, c_sg) in goal_costs.items():
        weights[goal] = math.exp(-beta * (cost_observed + c_qg - c_sg) * cost_scale)
    total = sum(weights.values())
    return Belief({g: w / total for g, w in weights.items()})


def _resolve_goals(workspace: Workspace, goals) -> list:
    out = []
    for g in goals:
        if g not in out:
            out.append(g)
    if not out:
        raise EmptyGoalSet("no goals to infer over")
    return [(g, workspace.item_position(g)) for g in out]


def goal_posterior(
    workspace: Workspace,
    start,
    observed: Sequence,
    goals: Sequence[str],
    params: LegibilityParams,
    router: Optional[GridRouter] = None,
) -> Belief:
    """Belief over goal items given the observed motion prefix.

    ``observed`` must begin at ``start`` (within one grid resolution) and stay
    inside the workspace. Goal costs come from optimal raw grid costs; the
    observed cost is the plain polyline length.
    """
    router = router or router_for(workspace)
    start = as_point(start)
    resolved = _resolve_goals(workspace, goals)
    if not observed:
        observed = [start]
    first = as_point(observed[0])
    if first.dist(start) > router.grid.resolution + 1e-9:
        raise ValueError("observed prefix must begin at the start position")
    q = as_point(observed[-1])
    c_obs = observed_cost(observed)
    goal_costs = {}
    for goal, pos in resolved:
        try:
            c_qg = router.grid_cost(q, pos)
            c_sg = router.grid_cost(start, pos)
        except Exception as exc:
            raise UnreachableGoal(f"goal {goal!r}: {exc}") from exc
        goal_costs[goal] = (c_qg, c_sg)
    return posterior_from_costs(
        c_obs, goal_costs, params.beta, 1.0 / workspace.diagonal
    )


# -- compiled checkpoint scorer --------------------------------------------


def _env_score_py(
    buf_axis, buf_diag, rows, c_sg, true_idx, wps, cumcost, checkpoints,
    beta, scale, penalty, res, diag_step, ox, oy, width, height,
):
    k = c_sg.shape[0]
    n = wps.shape[0]
    total = 0.0
    for ci in range(checkpoints.shape[0]):
        f = checkpoints[ci]
        fx, fy = wps[n - 1, 0], wps[n - 1, 1]
        if f >= 1.0 or cumcost == 0.0:
            qx, qy = wps[n - 1, 0], wps[n - 1, 1]
            c_obs = cumcost
        else:
            target = f * cumcost
            c_obs = target
            qx, qy = wps[n - 1, 0], wps[n - 1, 1]
            acc = 0.0
            for i in range(n - 1):
                dx = wps[i + 1, 0] - wps[i, 0]
                dy = wps[i + 1, 1] - wps[i, 1]
                seg = math.hypot(dx, dy)
                if acc + seg >= target:
                    t = (target - acc) / seg if seg > 0 else 0.0
                    qx = wps[i, 0] + t * dx
                    qy = wps[i, 1] + t * dy
                    fx = wps[i + 1, 0]
                    fy = wps[i + 1, 1]
                    break
                acc += seg
        ux = (qx - ox) / res
        uy = (qy - oy) / res
        # a prefix endpoint exactly on a cell boundary (diagonal segments
        # cross cell corners) resolves to the forward waypoint's cell, which
        # co-translates and co-rotates with the path
        if (
            abs(ux - math.floor(ux + 0.5)) <= 1e-9
            or abs(uy - math.floor(uy + 0.5)) <= 1e-9
        ):
            ix = int(math.floor((fx - ox) / res))
            iy = int(math.floor((fy - oy) / res))
        else:
            ix = int(math.floor(ux))
            iy = int(math.floor(uy))
        if ix < 0 or ix >= width or iy < 0 or iy >= height:
            return math.nan
        cell = iy * width + ix
        weights = np.empty(k)
        wsum = 0.0
        for g in range(k):
            na = buf_axis[rows[g], cell]
            nd = buf_diag[rows[g], cell]
            if na < 0:
                return math.nan
            c_qg = na * res + nd * diag_step
            e = math.exp(-beta * (c_obs + c_qg - c_sg[g]) * scale)
            weights[g] = e
            wsum += e
        p_true = weights[true_idx] / wsum
        failed = False
        top = -1.0
        second = -1.0
        for g in range(k):
            p = weights[g] / wsum
            if g != true_idx and p >= p_true:
                failed = True
            if p > top:
                second = top
                top = p
            elif p > second:
                second = p
        if failed:
            total += -penalty
        else:
            total += 1.0 if k < 2 else top - second
    return total / checkpoints.shape[0]


if _HAVE_NUMBA:
    _env_score_core = njit(cache=True)(_env_score_py)
else:  # pragma: no cover - numba is a declared dependency
    _env_score_core = _env_score_py


class _GoalTerms:
    """Per-goal distance-field rows and start costs for the scorer."""

    __slots__ = ("rows", "c_sg", "goal_ids", "start")

    def __init__(self, router: GridRouter, start, resolved):
        grid = router.grid
        res = grid.resolution
        diag_step = router.diag_step
        try:
            sy, sx = grid.cell_of(start)
        except Exception as exc:
            raise UnreachableGoal(str(exc)) from exc
        scell = sy * grid.width + sx
        rows = np.empty(len(resolved), dtype=np.int64)
        for i, (goal, pos) in enumerate(resolved):
            try:
                cell = grid.cell_of(pos)
            except Exception as exc:
                raise UnreachableGoal(f"goal {goal!r}: {exc}") from exc
            if grid.blocked[cell]:
                raise UnreachableGoal(f"goal {goal!r} sits in a blocked cell")
            rows[i] = router.field_index(cell)
        na = router._buf_axis[rows, scell]
        if na.min() < 0:
            bad = resolved[int(np.argmin(na))][0]
            raise UnreachableGoal(f"goal {bad!r} unreachable from start")
        self.rows = rows
        self.c_sg = na * res + router._buf_diag[rows, scell] * diag_step
        self.goal_ids = [g for g, _ in resolved]
        self.start = start


def _env_score_from_terms(
    workspace: Workspace,
    router: GridRouter,
    terms: _GoalTerms,
    true_index: int,
    true_pos,
    params: LegibilityParams,
    checkpoints: np.ndarray,
) -> float:
    try:
        wps, cumcost = router.raw_path_array(terms.start, true_pos)
    except Exception as exc:
        raise UnreachableGoal(str(exc)) from exc
    grid = router.grid
    value = _env_score_core(
        router._buf_axis,
        router._buf_diag,
        terms.rows,
        terms.c_sg,
        true_index,
        wps,
        cumcost,
        checkpoints,
        params.beta,
        1.0 / workspace.diagonal,
        params.penalty_c,
        grid.resolution,
        router.diag_step,
        grid.origin[0],
        grid.origin[1],
        grid.width,
        grid.height,
    )
    if math.isnan(value):
        raise UnreachableGoal("a goal became unreachable from the prefix")
    return value


def step_goal_terms(workspace, router, start, resolved) -> _GoalTerms:
    return _GoalTerms(router, as_point(start), resolved)


def env_legibility(
    workspace: Workspace,
    start,
    g_true: str,
    goals: Sequence[str],
    params: LegibilityParams,
    router: Optional[GridRouter] = None,
) -> float:
    """Mean prediction quality along the optimal approach to the true goal.

    The approach trajectory is the pre-shortcut optimal path. At each
    checkpoint fraction the posterior over ``goals`` is computed from the
    truncated prefix; the contribution is the prediction margin when the true
    goal is the unique argmax and -penalty_c otherwise (a tie counts as a
    failed prediction, since the observer cannot commit on a tie).
    """
    router = router or router_for(workspace)
    start = as_point(start)
    goal_ids = [g for g in goals]
    if g_true not in goal_ids:
        raise ValueError(f"true goal {g_true!r} not in the goal set")
    resolved = _resolve_goals(workspace, goal_ids)
    terms = _GoalTerms(router, start, resolved)
    true_index = terms.goal_ids.index(g_true)
    checkpoints = np.asarray(params.checkpoints)
    return _env_score_from_terms(
        workspace,
        router,
        terms,
        true_index,
        dict(resolved)[g_true],
        params,
        checkpoints,
    )
