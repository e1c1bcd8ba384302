"""Fused evaluation of item-move candidates for the descent inner loop.

One descent round evaluates K Gaussian move candidates per item. For each
candidate only the steps whose eligible goal set contains the moved item (or
whose origin is the moved item) change, and the expensive inputs (distance
fields, approach paths to unmoved goals) are shared across candidates. This
module packs the walk plan and the per-round state into arrays and runs
validation plus scoring for a whole candidate batch inside one compiled call.

The kernel reuses the exact same compiled primitives as the reference path
(_dijkstra_counts_nb, _descend_cells_nb, _env_score_core), reproduces the
reference float expressions term for term, and is cross-checked against the
generic objective in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import EPS
from .legibility import _env_score_core
from .planner import _descend_cells_nb, _dijkstra_counts_nb
from .workspace import Workspace, router_for

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*a, **k):
        def wrap(f):
            return f

        return wrap if not (a and callable(a[0])) else a[0]


@njit(cache=True)
def _candidate_kernel(
    positions,          # (n_items, 2) current item positions
    radii,              # (n_items,)
    cand_item,          # (m,) int64 moved item index per candidate
    cand_pos,           # (m, 2) candidate positions
    bx0, by0, bx1, by1,  # workspace bounds
    obst_verts,         # (total_verts, 2) concatenated obstacle vertices
    obst_off,           # (n_obst + 1,) vertex offsets
    blocked,            # (h, w) grid occupancy
    ox, oy, res, diag_step,
    start_x, start_y,
    buf_axis, buf_diag,  # (rows, h*w) int32 field buffers
    cell_row,           # (h*w,) int64: field buffer row per cell, -1 unknown
    n_rows,             # int64 current row count
    step_goals,         # (S, kmax) int64 item index per goal slot, -1 pad
    step_klen,          # (S,) int64
    step_origin,        # (S,) int64 item index of origin, -1 = start
    step_targets,       # (S, kmax) int64 target slots (index into goal slots), -1 pad
    step_counts,        # (S,) float64 multiplicities
    base_values,        # (S,) float64 step values of the base workspace
    n_orders,
    paths,              # (n_items, MAXP, 2) cached approach start->item
    path_len,           # (n_items,) int64
    path_cum,           # (n_items,) float64
    checkpoints,
    beta, scale, penalty,
):
    h, w = blocked.shape
    m = cand_item.shape[0]
    out = np.empty(m)
    valid = np.zeros(m, dtype=np.uint8)
    n_items = positions.shape[0]
    n_obst = obst_off.shape[0] - 1
    sx = int(np.floor((start_x - ox) / res))
    sy = int(np.floor((start_y - oy) / res))
    scell = sy * w + sx
    S = step_goals.shape[0]

    for c in range(m):
        mi = cand_item[c]
        px = cand_pos[c, 0]
        py = cand_pos[c, 1]
        r = radii[mi]
        # bounds containment, mirroring the reference epsilon semantics
        if not (bx0 <= px - r and px + r <= bx1 and by0 <= py - r and py + r <= by1):
            continue
        ok = True
        for j in range(n_items):
            if j == mi:
                continue
            dx = px - positions[j, 0]
            dy = py - positions[j, 1]
            if np.hypot(dx, dy) < r + radii[j] - EPS:
                ok = False
                break
        if not ok:
            continue
        for o in range(n_obst):
            v0 = obst_off[o]
            v1 = obst_off[o + 1]
            nv = v1 - v0
            inside = True
            best = 1e300
            for i in range(nv):
                ax, ay = obst_verts[v0 + i, 0], obst_verts[v0 + i, 1]
                jn = v0 + i + 1 if i + 1 < nv else v0
                bx, by = obst_verts[jn, 0], obst_verts[jn, 1]
                if (bx - ax) * (py - ay) - (by - ay) * (px - ax) < -1e-9:
                    inside = False
                ddx, ddy = bx - ax, by - ay
                L2 = ddx * ddx + ddy * ddy
                if L2 <= 1e-18:
                    d = np.hypot(px - ax, py - ay)
                else:
                    t = ((px - ax) * ddx + (py - ay) * ddy) / L2
                    if t < 0.0:
                        t = 0.0
                    elif t > 1.0:
                        t = 1.0
                    d = np.hypot(px - (ax + t * ddx), py - (ay + t * ddy))
                if d < best:
                    best = d
            dist = 0.0 if inside else best
            if dist < r - EPS:
                ok = False
                break
        if not ok:
            continue
        ix = int(np.floor((px - ox) / res))
        iy = int(np.floor((py - oy) / res))
        if ix < 0 or ix >= w or iy < 0 or iy >= h or blocked[iy, ix]:
            continue
        cell = iy * w + ix
        row = cell_row[cell]
        if row < 0:
            A, D = _dijkstra_counts_nb(blocked, iy, ix)
            row = n_rows
            n_rows += 1
            buf_axis[row] = A.ravel()
            buf_diag[row] = D.ravel()
            cell_row[cell] = row
        if buf_axis[row, scell] < 0:
            continue  # unreachable from start
        valid[c] = 1

        # approach path start -> moved position on the unchanged grid
        mcells = _descend_cells_nb(
            blocked,
            buf_axis[row].reshape(h, w),
            buf_diag[row].reshape(h, w),
            sy, sx, iy, ix,
        )
        nmc = mcells.shape[0]
        mwps = np.empty((nmc + 2, 2))
        mwps[0, 0] = start_x
        mwps[0, 1] = start_y
        nw = 1
        mcum = 0.0
        has_prev = False
        pi = 0
        pj = 0
        for i in range(nmc):
            ccx = ox + (mcells[i, 1] + 0.5) * res
            ccy = oy + (mcells[i, 0] + 0.5) * res
            if abs(ccx - mwps[nw - 1, 0]) > 1e-12 or abs(ccy - mwps[nw - 1, 1]) > 1e-12:
                if has_prev:
                    mcum += np.hypot(
                        (mcells[i, 1] - pj) * res, (mcells[i, 0] - pi) * res
                    )
                else:
                    mcum += np.hypot(ccx - mwps[nw - 1, 0], ccy - mwps[nw - 1, 1])
                mwps[nw, 0] = ccx
                mwps[nw, 1] = ccy
                nw += 1
            has_prev = True
            pi = mcells[i, 0]
            pj = mcells[i, 1]
        if abs(px - mwps[nw - 1, 0]) > 1e-12 or abs(py - mwps[nw - 1, 1]) > 1e-12:
            mcum += np.hypot(px - mwps[nw - 1, 0], py - mwps[nw - 1, 1])
            mwps[nw, 0] = px
            mwps[nw, 1] = py
            nw += 1

        total = 0.0
        feasible = True
        for s in range(S):
            k = step_klen[s]
            affected = step_origin[s] == mi
            for g in range(k):
                if step_goals[s, g] == mi:
                    affected = True
                    break
            if not affected:
                total += step_counts[s] * base_values[s]
                continue
            if step_origin[s] >= 0:
                # moving origins are only used by non-return-home walks,
                # which the generic path handles; keep kernel scope tight
                feasible = False
                break
            rows_s = np.empty(k, dtype=np.int64)
            c_sg = np.empty(k)
            for g in range(k):
                gi = step_goals[s, g]
                if gi == mi:
                    rows_s[g] = row
                else:
                    gx = int(np.floor((positions[gi, 0] - ox) / res))
                    gy = int(np.floor((positions[gi, 1] - oy) / res))
                    rows_s[g] = cell_row[gy * w + gx]
                na = buf_axis[rows_s[g], scell]
                nd = buf_diag[rows_s[g], scell]
                if na < 0:
                    feasible = False
                    break
                c_sg[g] = na * res + nd * diag_step
            if not feasible:
                break
            value = 0.0
            for t in range(step_targets.shape[1]):
                slot = step_targets[s, t]
                if slot < 0:
                    break
                gi = step_goals[s, slot]
                if gi == mi:
                    wps = mwps[:nw]
                    cum = mcum
                else:
                    L = path_len[gi]
                    wps = paths[gi, :L]
                    cum = path_cum[gi]
                v = _env_score_core(
                    buf_axis, buf_diag, rows_s, c_sg, slot,
                    wps, cum, checkpoints,
                    beta, scale, penalty,
                    res, diag_step, ox, oy, w, h,
                )
                if np.isnan(v):
                    feasible = False
                    break
                value += v
            if not feasible:
                break
            total += step_counts[s] * value
        if not feasible:
            valid[c] = 0
            continue
        out[c] = total / n_orders
    return out, valid, n_rows


@njit(cache=True)
def _fresh_kernel(
    positions,          # (n_items, 2) item positions (goal order)
    blocked,            # (h, w) occupancy of the CANDIDATE grid
    ox, oy, res, diag_step,
    start_x, start_y,
    buf_axis, buf_diag,
    cell_row,
    n_rows,
    step_goals, step_klen, step_origin, step_targets, step_counts,
    n_orders,
    checkpoints,
    beta, scale, penalty,
):
    """Full objective of one workspace on its own grid; NaN when invalid.

    Covers start/item cell blocking and reachability (the non-geometric half
    of the workspace invariants) plus the whole step walk.
    """
    h, w = blocked.shape
    n_items = positions.shape[0]
    sx = int(np.floor((start_x - ox) / res))
    sy = int(np.floor((start_y - oy) / res))
    if sx < 0 or sx >= w or sy < 0 or sy >= h or blocked[sy, sx]:
        return np.nan, n_rows
    scell = sy * w + sx

    rows_items = np.empty(n_items, dtype=np.int64)
    for i in range(n_items):
        ix = int(np.floor((positions[i, 0] - ox) / res))
        iy = int(np.floor((positions[i, 1] - oy) / res))
        if ix < 0 or ix >= w or iy < 0 or iy >= h or blocked[iy, ix]:
            return np.nan, n_rows
        cell = iy * w + ix
        row = cell_row[cell]
        if row < 0:
            A, D = _dijkstra_counts_nb(blocked, iy, ix)
            row = n_rows
            n_rows += 1
            buf_axis[row] = A.ravel()
            buf_diag[row] = D.ravel()
            cell_row[cell] = row
        if buf_axis[row, scell] < 0:
            return np.nan, n_rows
        rows_items[i] = row

    cap = h * w + 3
    paths = np.empty((n_items, cap, 2))
    path_len = np.empty(n_items, dtype=np.int64)
    path_cum = np.empty(n_items)
    for i in range(n_items):
        ix = int(np.floor((positions[i, 0] - ox) / res))
        iy = int(np.floor((positions[i, 1] - oy) / res))
        cells = _descend_cells_nb(
            blocked,
            buf_axis[rows_items[i]].reshape(h, w),
            buf_diag[rows_items[i]].reshape(h, w),
            sy, sx, iy, ix,
        )
        if cells.shape[0] == 0:
            return np.nan, n_rows
        paths[i, 0, 0] = start_x
        paths[i, 0, 1] = start_y
        nw = 1
        cum = 0.0
        has_prev = False
        pi = 0
        pj = 0
        for c in range(cells.shape[0]):
            ccx = ox + (cells[c, 1] + 0.5) * res
            ccy = oy + (cells[c, 0] + 0.5) * res
            if (
                abs(ccx - paths[i, nw - 1, 0]) > 1e-12
                or abs(ccy - paths[i, nw - 1, 1]) > 1e-12
            ):
                if has_prev:
                    cum += np.hypot(
                        (cells[c, 1] - pj) * res, (cells[c, 0] - pi) * res
                    )
                else:
                    cum += np.hypot(
                        ccx - paths[i, nw - 1, 0], ccy - paths[i, nw - 1, 1]
                    )
                paths[i, nw, 0] = ccx
                paths[i, nw, 1] = ccy
                nw += 1
            has_prev = True
            pi = cells[c, 0]
            pj = cells[c, 1]
        if (
            abs(positions[i, 0] - paths[i, nw - 1, 0]) > 1e-12
            or abs(positions[i, 1] - paths[i, nw - 1, 1]) > 1e-12
        ):
            cum += np.hypot(
                positions[i, 0] - paths[i, nw - 1, 0],
                positions[i, 1] - paths[i, nw - 1, 1],
            )
            paths[i, nw, 0] = positions[i, 0]
            paths[i, nw, 1] = positions[i, 1]
            nw += 1
        path_len[i] = nw
        path_cum[i] = cum

    S = step_goals.shape[0]
    total = 0.0
    for s in range(S):
        if step_origin[s] >= 0:
            return np.nan, n_rows  # non-start origins use the generic path
        k = step_klen[s]
        rows_s = np.empty(k, dtype=np.int64)
        c_sg = np.empty(k)
        for g in range(k):
            gi = step_goals[s, g]
            rows_s[g] = rows_items[gi]
            na = buf_axis[rows_s[g], scell]
            nd = buf_diag[rows_s[g], scell]
            c_sg[g] = na * res + nd * diag_step
        value = 0.0
        for t in range(step_targets.shape[1]):
            slot = step_targets[s, t]
            if slot < 0:
                break
            gi = step_goals[s, slot]
            v = _env_score_core(
                buf_axis, buf_diag, rows_s, c_sg, slot,
                paths[gi, : path_len[gi]], path_cum[gi], checkpoints,
                beta, scale, penalty,
                res, diag_step, ox, oy, w, h,
            )
            if np.isnan(v):
                return np.nan, n_rows
            value += v
        total += step_counts[s] * value
    return total / n_orders, n_rows


@dataclass
class FastRoundContext:
    """Per-workspace state shared by all move candidates of one round."""

    workspace: Workspace
    values: np.ndarray  # base per-step values (plan order)
    total: float


class FastMoveEvaluator:
    """Batch evaluator tied to one objective (task, params, walk semantics).

    Supports walks whose per-step origin is the workspace start (the
    turn-taking configuration); other configurations use the generic path.
    """

    def __init__(self, objective):
        self.objective = objective
        cfg = objective.score_config
        self.supported = _HAVE_NUMBA and not cfg.score_current_goal_only
        if not self.supported:
            return
        n_orders, steps = objective._plan
        items = [t.goal_item for t in objective.task.subtasks]
        self.goal_ids = sorted(set(items))
        index = {g: i for i, g in enumerate(self.goal_ids)}
        if any(origin is not None for (origin, _, _), _ in steps):
            self.supported = False
            return
        S = len(steps)
        kmax = max(len(goals) for (_, goals, _), _ in steps)
        self.step_goals = np.full((S, kmax), -1, dtype=np.int64)
        self.step_klen = np.zeros(S, dtype=np.int64)
        self.step_origin = np.full(S, -1, dtype=np.int64)
        self.step_targets = np.full((S, kmax), -1, dtype=np.int64)
        self.step_counts = np.zeros(S)
        self.step_keys = []
        self.n_orders = float(n_orders)
        for s, ((origin, goals, current), count) in enumerate(steps):
            self.step_klen[s] = len(goals)
            for g, goal in enumerate(goals):
                self.step_goals[s, g] = index[goal]
                self.step_targets[s, g] = g
            self.step_counts[s] = float(count)
            self.step_keys.append((origin, goals, current))
        self.checkpoints = np.asarray(objective.params.checkpoints)

    def prepare(self, workspace: Workspace) -> Optional[FastRoundContext]:
        """Base per-step values for this workspace (from the shared cache)."""
        if not self.supported:
            return None
        obj = self.objective
        total = obj(workspace)  # fills the step cache
        router = router_for(workspace)
        positions = {g: workspace.item_position(g) for g in self.goal_ids}
        values = np.empty(len(self.step_keys))
        for s, (origin, goals, current) in enumerate(self.step_keys):
            key = (
                router.uid,
                workspace.start,
                tuple((g, positions[g]) for g in goals),
                current,
            )
            cached = obj._step_cache.get(key)
            if cached is None:
                return None  # pragma: no cover - cache was just filled
            values[s] = cached
        return FastRoundContext(workspace, values, total)

    def evaluate(self, ctx: FastRoundContext, cand_item_ids, cand_positions):
        """Scores for move candidates; NaN marks invalid candidates.

        Returns user-internal scores (negated legibility), matching
        objective(apply_perturbation(w, MoveItem(...))) for valid candidates.
        """
        ws = ctx.workspace
        router = router_for(ws)
        grid = router.grid
        h, w = grid.height, grid.width
        cells = h * w

        # room for every candidate of this round; geometric growth keeps the
        # copy cost amortized across rounds on the same grid
        needed = len(router._field_index) + len(cand_item_ids) + 1
        if router._buf_axis.shape[0] < needed:
            cap = router._buf_axis.shape[0]
            while cap < needed:
                cap *= 2
            cap = min(max(cap, needed), max(cells, needed))
            grow = cap - router._buf_axis.shape[0]
            router._buf_axis = np.vstack(
                [router._buf_axis, np.empty((grow, cells), dtype=np.int32)]
            )
            router._buf_diag = np.vstack(
                [router._buf_diag, np.empty((grow, cells), dtype=np.int32)]
            )
        cell_row = getattr(router, "_cell_row_vec", None)
        if cell_row is None:
            cell_row = np.full(cells, -1, dtype=np.int64)
            for cell, row in router._field_index.items():
                cell_row[cell[0] * w + cell[1]] = row
            router._cell_row_vec = cell_row

        positions = np.array(
            [ws.item_position(g) for g in self.goal_ids], dtype=float
        )
        radii = np.array([ws.item(g).radius for g in self.goal_ids])
        index = {g: i for i, g in enumerate(self.goal_ids)}

        # per-goal field rows and approach paths for the current layout
        goal_paths = []
        path_len = np.zeros(len(self.goal_ids), dtype=np.int64)
        path_cum = np.zeros(len(self.goal_ids))
        for g, goal in enumerate(self.goal_ids):
            pos = ws.item_position(goal)
            cell = grid.cell_of(pos)
            row = router.field_index(cell)
            cell_row[cell[0] * w + cell[1]] = row
            wps, cum = router.raw_path_array(ws.start, pos)
            goal_paths.append(wps)
            path_len[g] = wps.shape[0]
            path_cum[g] = cum
        maxlen = max(2, int(path_len.max()))
        paths = np.zeros((len(self.goal_ids), maxlen, 2))
        for g, wps in enumerate(goal_paths):
            paths[g, : wps.shape[0]] = wps

        obstacles = ws.obstacles()
        if obstacles:
            obst_verts = np.concatenate([p.vertex_array() for p in obstacles])
            obst_off = np.cumsum([0] + [len(p.vertices) for p in obstacles]).astype(
                np.int64
            )
        else:
            obst_verts = np.zeros((0, 2))
            obst_off = np.zeros(1, dtype=np.int64)

        (bx0, by0), (bx1, by1) = ws.bounds
        cand_item = np.array([index[i] for i in cand_item_ids], dtype=np.int64)
        cand_pos = np.asarray(cand_positions, dtype=float)
        out, valid, n_rows = _candidate_kernel(
            positions,
            radii,
            cand_item,
            cand_pos,
            bx0, by0, bx1, by1,
            obst_verts,
            obst_off,
            grid.blocked,
            grid.origin[0], grid.origin[1], grid.resolution, router.diag_step,
            ws.start[0], ws.start[1],
            router._buf_axis, router._buf_diag,
            cell_row,
            np.int64(len(router._field_index)),
            self.step_goals,
            self.step_klen,
            self.step_origin,
            self.step_targets,
            self.step_counts,
            ctx.values,
            self.n_orders,
            paths,
            path_len,
            path_cum,
            self.checkpoints,
            self.objective.params.beta,
            1.0 / ws.diagonal,
            self.objective.params.penalty_c,
        )
        # adopt rows the kernel added so later python-path queries reuse them
        _sync_router_rows(router, cell_row, n_rows, h, w)
        scores = np.where(valid == 1, -out, np.nan)
        return scores

    def evaluate_fresh(self, ws: Workspace) -> float:
        """Full internal score of a workspace on its own (possibly new) grid.

        Returns NaN when the workspace violates the planner-side invariants
        (blocked or unreachable start/items). Geometric invariants must be
        checked by the caller. Matches the generic objective exactly.
        """
        if not self.supported:
            return math.nan
        router = router_for(ws)
        grid = router.grid
        h, w = grid.height, grid.width
        cells = h * w
        needed = len(router._field_index) + len(self.goal_ids) + 2
        if router._buf_axis.shape[0] < needed:
            cap = max(router._buf_axis.shape[0], 8)
            while cap < needed:
                cap *= 2
            grow = cap - router._buf_axis.shape[0]
            router._buf_axis = np.vstack(
                [router._buf_axis, np.empty((grow, cells), dtype=np.int32)]
            )
            router._buf_diag = np.vstack(
                [router._buf_diag, np.empty((grow, cells), dtype=np.int32)]
            )
        cell_row = getattr(router, "_cell_row_vec", None)
        if cell_row is None:
            cell_row = np.full(cells, -1, dtype=np.int64)
            for cell, row in router._field_index.items():
                cell_row[cell[0] * w + cell[1]] = row
            router._cell_row_vec = cell_row
        positions = np.array(
            [ws.item_position(g) for g in self.goal_ids], dtype=float
        )
        value, n_rows = _fresh_kernel(
            positions,
            grid.blocked,
            grid.origin[0], grid.origin[1], grid.resolution, router.diag_step,
            ws.start[0], ws.start[1],
            router._buf_axis, router._buf_diag,
            cell_row,
            np.int64(len(router._field_index)),
            self.step_goals,
            self.step_klen,
            self.step_origin,
            self.step_targets,
            self.step_counts,
            self.n_orders,
            self.checkpoints,
            self.objective.params.beta,
            1.0 / ws.diagonal,
            self.objective.params.penalty_c,
        )
        _sync_router_rows(router, cell_row, n_rows, h, w)
        return -value if not math.isnan(value) else math.nan


def _sync_router_rows(router, cell_row, n_rows, h, w) -> None:
    if n_rows > len(router._field_index):
        for cell in np.nonzero(cell_row >= 0)[0]:
            key = (int(cell) // w, int(cell) % w)
            if key not in router._field_index:
                row = int(cell_row[cell])
                router._field_index[key] = row
                A = router._buf_axis[row].reshape(h, w).copy()
                D = router._buf_diag[row].reshape(h, w).copy()
                router._fields[key] = (A, D)
