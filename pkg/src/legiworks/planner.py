"""Shortest-path machinery on a rasterized workspace.

The human trajectory generator is approximated by minimum-cost paths on an
8-connected occupancy grid (axis step = resolution, diagonal = resolution *
sqrt(2)), post-processed by line-of-sight shortcutting. Grid costs are kept
exact by carrying (axis, diagonal) step counts as integers and only forming
the float cost as ``a * res + d * diag`` in one canonical expression: two
step-count pairs are never cost-tied (sqrt(2) is irrational), so float
comparisons order them exactly and every optimal-cost query returns the same
bits as an independent Dijkstra.

Path selection among cost-equal alternatives descends the goal distance
field, preferring cells that hug the straight start-goal segment. That rule
is built from isometry-invariant quantities, which keeps trajectories (and
everything derived from them) exactly stable under grid translations and
quarter-turn rotations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BlockedEndpoint, EmptyWorkspace, OutOfBounds, Unreachable
from .geometry import EPS, Point2, as_point, polygon_distance_batch, polyline_length

SQRT2 = math.sqrt(2.0)

# (dy, dx, axis increment, diagonal increment) for the 8 neighbors
_STEPS = (
    (-1, 0, 1, 0),
    (1, 0, 1, 0),
    (0, -1, 1, 0),
    (0, 1, 1, 0),
    (-1, -1, 0, 1),
    (-1, 1, 0, 1),
    (1, -1, 0, 1),
    (1, 1, 0, 1),
)

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap if not (args and callable(args[0])) else args[0]


@dataclass(frozen=True)
class Trajectory:
    """Ordered waypoints with their cumulative Euclidean length."""

    waypoints: tuple
    cumulative_cost: float

    @staticmethod
    def from_points(points: Sequence) -> "Trajectory":
        pts = tuple(as_point(p) for p in points)
        if not pts:
            raise ValueError("trajectory needs at least one waypoint")
        return Trajectory(pts, polyline_length(pts))

    def truncated(self, fraction: float) -> "Trajectory":
        """Prefix covering ``fraction`` of the cumulative cost (interpolated)."""
        if not 0.0 < fraction <= 1.0:
            raise ValueError("fraction must be in (0, 1]")
        if fraction == 1.0 or self.cumulative_cost == 0.0:
            return self
        target = fraction * self.cumulative_cost
        pts = [self.waypoints[0]]
        acc = 0.0
        for p, q in zip(self.waypoints, self.waypoints[1:]):
            seg = math.hypot(q[0] - p[0], q[1] - p[1])
            if acc + seg >= target:
                t = (target - acc) / seg if seg > 0 else 0.0
                pts.append(Point2(p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
                return Trajectory.from_points(pts)
            pts.append(q)
            acc += seg
        return self

    def point_at_fraction(self, fraction: float) -> Point2:
        """Point reached after covering ``fraction`` of the cumulative cost."""
        if not 0.0 < fraction <= 1.0:
            raise ValueError("fraction must be in (0, 1]")
        if fraction == 1.0 or self.cumulative_cost == 0.0:
            return self.waypoints[-1]
        target = fraction * self.cumulative_cost
        acc = 0.0
        for p, q in zip(self.waypoints, self.waypoints[1:]):
            seg = math.hypot(q[0] - p[0], q[1] - p[1])
            if acc + seg >= target:
                t = (target - acc) / seg if seg > 0 else 0.0
                return Point2(p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))
            acc += seg
        return self.waypoints[-1]


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Rasterized workspace: blocked[iy, ix] marks untraversable cells."""

    resolution: float
    origin: Point2
    width: int
    height: int
    blocked: np.ndarray

    def cell_of(self, p) -> tuple:
        ix = int(math.floor((p[0] - self.origin[0]) / self.resolution))
        iy = int(math.floor((p[1] - self.origin[1]) / self.resolution))
        if not (0 <= ix < self.width and 0 <= iy < self.height):
            raise OutOfBounds(f"point ({p[0]}, {p[1]}) outside the grid")
        return iy, ix

    def center(self, iy: int, ix: int) -> Point2:
        return Point2(
            self.origin[0] + (ix + 0.5) * self.resolution,
            self.origin[1] + (iy + 0.5) * self.resolution,
        )

    def is_blocked(self, p) -> bool:
        iy, ix = self.cell_of(p)
        return bool(self.blocked[iy, ix])

    def segment_clear(self, a, b) -> bool:
        """Sample the segment at <= resolution/2 spacing; all cells unblocked."""
        length = math.hypot(b[0] - a[0], b[1] - a[1])
        n = max(1, int(math.ceil(length / (self.resolution / 2.0))))
        for k in range(n + 1):
            t = k / n
            x = a[0] + t * (b[0] - a[0])
            y = a[1] + t * (b[1] - a[1])
            try:
                iy, ix = self.cell_of((x, y))
            except OutOfBounds:
                return False
            if self.blocked[iy, ix]:
                return False
        return True


def rasterize(workspace, resolution: float, agent_radius: float) -> OccupancyGrid:
    """Grid covering the workspace bounds.

    A cell is blocked iff its center lies within any virtual or fixed obstacle
    inflated by the agent radius, or outside the bounds. Goal items never
    block cells.
    """
    if resolution <= 0:
        raise ValueError("resolution must be > 0")
    if agent_radius < 0:
        raise ValueError("agent_radius must be >= 0")
    (xmin, ymin), (xmax, ymax) = workspace.bounds
    if xmax - xmin <= EPS or ymax - ymin <= EPS:
        raise EmptyWorkspace("workspace bounds enclose zero area")
    width = max(1, int(math.ceil((xmax - xmin) / resolution - EPS)))
    height = max(1, int(math.ceil((ymax - ymin) / resolution - EPS)))
    xs = xmin + (np.arange(width) + 0.5) * resolution
    ys = ymin + (np.arange(height) + 0.5) * resolution
    blocked = np.zeros((height, width), dtype=bool)
    blocked[:, xs > xmax + EPS] = True
    blocked[ys > ymax + EPS, :] = True
    for poly in tuple(workspace.virtual_obstacles) + tuple(workspace.fixed_obstacles):
        _block_polygon(blocked, xs, ys, poly, agent_radius)
    return OccupancyGrid(
        resolution=resolution,
        origin=Point2(xmin, ymin),
        width=width,
        height=height,
        blocked=blocked,
    )


def _block_polygon(blocked, xs, ys, poly, agent_radius) -> None:
    """Mark cells whose center is within agent_radius of the polygon.

    Restricted to the polygon's inflated bounding box; the distance test only
    runs on candidate cells.
    """
    vx = [v[0] for v in poly.vertices]
    vy = [v[1] for v in poly.vertices]
    pad = agent_radius + EPS
    ix0 = int(np.searchsorted(xs, min(vx) - pad, side="left"))
    ix1 = int(np.searchsorted(xs, max(vx) + pad, side="right"))
    iy0 = int(np.searchsorted(ys, min(vy) - pad, side="left"))
    iy1 = int(np.searchsorted(ys, max(vy) + pad, side="right"))
    if ix0 >= ix1 or iy0 >= iy1:
        return
    gx, gy = np.meshgrid(xs[ix0:ix1], ys[iy0:iy1])
    centers = np.column_stack([gx.ravel(), gy.ravel()])
    hit = polygon_distance_batch(poly, centers) <= agent_radius + EPS
    blocked[iy0:iy1, ix0:ix1] |= hit.reshape(iy1 - iy0, ix1 - ix0)


# -- exact distance fields ---------------------------------------------------


def _dijkstra_counts_py(blocked, sy, sx):
    import heapq

    h, w = blocked.shape
    A = np.full((h, w), -1, dtype=np.int32)
    D = np.full((h, w), -1, dtype=np.int32)
    if blocked[sy, sx]:
        return A, D
    done = np.zeros((h, w), dtype=bool)
    A[sy, sx] = 0
    D[sy, sx] = 0
    heap = [(0.0, sy, sx)]
    while heap:
        v, cy, cx = heapq.heappop(heap)
        if done[cy, cx]:
            continue
        done[cy, cx] = True
        a0, d0 = int(A[cy, cx]), int(D[cy, cx])
        for dy, dx, da, dd in _STEPS:
            ny, nx = cy + dy, cx + dx
            if 0 <= ny < h and 0 <= nx < w and not blocked[ny, nx] and not done[ny, nx]:
                a1, d1 = a0 + da, d0 + dd
                nv = a1 + d1 * SQRT2
                if A[ny, nx] < 0 or nv < A[ny, nx] + D[ny, nx] * SQRT2:
                    A[ny, nx] = a1
                    D[ny, nx] = d1
                    heapq.heappush(heap, (nv, ny, nx))
    return A, D


if _HAVE_NUMBA:

    @njit(cache=True)
    def _dijkstra_counts_nb(blocked, sy, sx):  # pragma: no cover - jitted
        h, w = blocked.shape
        n = h * w
        A = np.full(n, -1, dtype=np.int32)
        D = np.full(n, -1, dtype=np.int32)
        V = np.full(n, np.inf)
        if blocked[sy, sx]:
            return A.reshape(h, w), D.reshape(h, w)
        flat = blocked.ravel()
        s = sy * w + sx
        A[s] = 0
        D[s] = 0
        V[s] = 0.0
        heap_key = np.empty(8 * n + 8, dtype=np.float64)
        heap_idx = np.empty(8 * n + 8, dtype=np.int32)
        heap_key[0] = 0.0
        heap_idx[0] = s
        size = 1
        sqrt2 = np.sqrt(2.0)
        while size > 0:
            key = heap_key[0]
            idx = heap_idx[0]
            size -= 1
            lastk = heap_key[size]
            lasti = heap_idx[size]
            i = 0
            half = size >> 1
            while i < half:
                l = 2 * i + 1
                r = l + 1
                if r < size and heap_key[r] < heap_key[l]:
                    l = r
                if heap_key[l] >= lastk:
                    break
                heap_key[i] = heap_key[l]
                heap_idx[i] = heap_idx[l]
                i = l
            heap_key[i] = lastk
            heap_idx[i] = lasti
            if key > V[idx]:  # stale entry; a better key was settled already
                continue
            cy = idx // w
            cx = idx % w
            a0 = A[idx]
            d0 = D[idx]
            up = cy > 0
            down = cy < h - 1
            left = cx > 0
            right = cx < w - 1
            for k in range(8):
                if k == 0:
                    if not up:
                        continue
                    j = idx - w
                    a1 = a0 + 1
                    d1 = d0
                elif k == 1:
                    if not down:
                        continue
                    j = idx + w
                    a1 = a0 + 1
                    d1 = d0
                elif k == 2:
                    if not left:
                        continue
                    j = idx - 1
                    a1 = a0 + 1
                    d1 = d0
                elif k == 3:
                    if not right:
                        continue
                    j = idx + 1
                    a1 = a0 + 1
                    d1 = d0
                elif k == 4:
                    if not (up and left):
                        continue
                    j = idx - w - 1
                    a1 = a0
                    d1 = d0 + 1
                elif k == 5:
                    if not (up and right):
                        continue
                    j = idx - w + 1
                    a1 = a0
                    d1 = d0 + 1
                elif k == 6:
                    if not (down and left):
                        continue
                    j = idx + w - 1
                    a1 = a0
                    d1 = d0 + 1
                else:
                    if not (down and right):
                        continue
                    j = idx + w + 1
                    a1 = a0
                    d1 = d0 + 1
                if flat[j]:
                    continue
                nv = a1 + d1 * sqrt2
                if nv < V[j]:
                    V[j] = nv
                    A[j] = a1
                    D[j] = d1
                    i = size
                    size += 1
                    while i > 0:
                        p = (i - 1) >> 1
                        if heap_key[p] <= nv:
                            break
                        heap_key[i] = heap_key[p]
                        heap_idx[i] = heap_idx[p]
                        i = p
                    heap_key[i] = nv
                    heap_idx[i] = j
        return A.reshape(h, w), D.reshape(h, w)


if _HAVE_NUMBA:

    @njit(cache=True)
    def _descend_cells_nb(blocked, A, D, sy, sx, gy, gx):
        # pragma: no cover - jitted
        h, w = blocked.shape
        sqrt2 = np.sqrt(2.0)
        out = np.empty((h * w + 8, 2), dtype=np.int64)
        out[0, 0] = sy
        out[0, 1] = sx
        n = 1
        cy, cx = sy, sx
        # straight-line direction in integer cell coordinates; deviations are
        # exact integers, so tie resolution is stable under grid translations
        # and quarter turns
        ux = gx - sx
        uy = gy - sy
        dys = np.array([-1, 1, 0, 0, -1, -1, 1, 1], dtype=np.int64)
        dxs = np.array([0, 0, -1, 1, -1, 1, -1, 1], dtype=np.int64)
        das = np.array([1, 1, 1, 1, 0, 0, 0, 0], dtype=np.int64)
        dds = np.array([0, 0, 0, 0, 1, 1, 1, 1], dtype=np.int64)
        while cy != gy or cx != gx:
            a0 = A[cy, cx]
            d0 = D[cy, cx]
            best_y = -1
            best_x = -1
            b0 = 0
            b1 = 0.0
            for k in range(8):
                ny = cy + dys[k]
                nx = cx + dxs[k]
                if ny < 0 or ny >= h or nx < 0 or nx >= w:
                    continue
                if blocked[ny, nx]:
                    continue
                if A[ny, nx] + das[k] != a0 or D[ny, nx] + dds[k] != d0:
                    continue
                dev = (nx - sx) * uy - (ny - sy) * ux
                if dev < 0:
                    dev = -dev
                val = A[ny, nx] + D[ny, nx] * sqrt2
                if (
                    best_y < 0
                    or dev < b0
                    or (dev == b0 and (val < b1 or (val == b1 and (ny < best_y or (ny == best_y and nx < best_x)))))
                ):
                    best_y = ny
                    best_x = nx
                    b0 = dev
                    b1 = val
            if best_y < 0:
                return out[:0]
            out[n, 0] = best_y
            out[n, 1] = best_x
            n += 1
            cy, cx = best_y, best_x
            if n >= h * w + 7:
                return out[:0]
        return out[:n]


def distance_counts(grid: OccupancyGrid, source_cell) -> tuple:
    """(axis, diag) optimal step counts from source_cell to every cell.

    Entries are -1 for unreachable or blocked cells. Counts are exact, so
    ``a * res + d * (res * sqrt(2))`` reproduces Dijkstra costs bit for bit.
    """
    sy, sx = source_cell
    blocked = np.ascontiguousarray(grid.blocked)
    if _HAVE_NUMBA:
        return _dijkstra_counts_nb(blocked, sy, sx)
    return _dijkstra_counts_py(blocked, sy, sx)


import itertools

_router_ids = itertools.count(1)


class GridRouter:
    """Field, cost and path queries on one grid, memoized per endpoint."""

    def __init__(self, grid: OccupancyGrid):
        self.grid = grid
        self.diag_step = grid.resolution * SQRT2
        self.uid = next(_router_ids)  # collision-free cache key for this grid
        self._fields = {}
        self._field_index = {}
        cells = grid.width * grid.height
        self._buf_axis = np.empty((8, cells), dtype=np.int32)
        self._buf_diag = np.empty((8, cells), dtype=np.int32)
        self._raw = {}
        self._raw_np = {}
        self._short = {}

    def field(self, target_cell) -> tuple:
        f = self._fields.get(target_cell)
        if f is None:
            f = distance_counts(self.grid, target_cell)
            self._fields[target_cell] = f
        return f

    def field_index(self, target_cell) -> int:
        """Row of this cell's distance field in the flat field buffers.

        The buffers let the checkpoint scorer gather many goals' fields
        without stacking copies per call.
        """
        idx = self._field_index.get(target_cell)
        if idx is None:
            A, D = self.field(target_cell)
            idx = len(self._field_index)
            if idx >= self._buf_axis.shape[0]:
                grow = max(8, self._buf_axis.shape[0])
                self._buf_axis = np.vstack(
                    [self._buf_axis, np.empty_like(self._buf_axis[:grow])]
                )
                self._buf_diag = np.vstack(
                    [self._buf_diag, np.empty_like(self._buf_diag[:grow])]
                )
            self._buf_axis[idx] = A.ravel()
            self._buf_diag[idx] = D.ravel()
            self._field_index[target_cell] = idx
            vec = getattr(self, "_cell_row_vec", None)
            if vec is not None:
                vec[target_cell[0] * self.grid.width + target_cell[1]] = idx
        return idx

    def _check_endpoint(self, p) -> tuple:
        cell = self.grid.cell_of(p)
        if self.grid.blocked[cell]:
            raise BlockedEndpoint(f"endpoint ({p[0]}, {p[1]}) is in a blocked cell")
        return cell

    def grid_cost(self, a, b) -> float:
        """Optimal raw 8-connected cost between the cells containing a and b."""
        ca = self._check_endpoint(a)
        cb = self._check_endpoint(b)
        A, D = self.field(cb)
        na, nd = int(A[ca]), int(D[ca])
        if na < 0:
            raise Unreachable(f"no path from ({a[0]}, {a[1]}) to ({b[0]}, {b[1]})")
        return na * self.grid.resolution + nd * self.diag_step

    def reachable(self, a, b) -> bool:
        try:
            self.grid_cost(a, b)
            return True
        except (Unreachable, BlockedEndpoint, OutOfBounds):
            return False

    def raw_path(self, a, b) -> Trajectory:
        """Canonical minimum-cost cell path from a to b, exact endpoints kept."""
        key = (as_point(a), as_point(b))
        t = self._raw.get(key)
        if t is None:
            wps, cum = self.raw_path_array(a, b)
            t = Trajectory(tuple(Point2(x, y) for x, y in wps), cum)
            self._raw[key] = t
        return t

    def raw_path_array(self, a, b) -> tuple:
        """Raw path waypoints as an (n, 2) float array plus cumulative cost.

        Center-to-center segment lengths are formed from integer cell deltas,
        so the cumulative cost is exactly invariant under grid translations
        and quarter turns (endpoint stubs aside).
        """
        key = (a[0], a[1], b[0], b[1])
        got = self._raw_np.get(key)
        if got is None:
            points, cum = self._descend(as_point(a), as_point(b))
            got = (np.asarray(points, dtype=float), cum)
            self._raw_np[key] = got
        return got

    def plan(self, a, b) -> Trajectory:
        """Shortcut trajectory from a to b (the path a human would follow).

        Shortcutting runs over the canonical endpoint order and is reversed
        when needed, so the cost is symmetric in the endpoints.
        """
        key = (as_point(a), as_point(b))
        t = self._short.get(key)
        if t is None:
            lo, hi = sorted(key)
            raw = self.raw_path(lo, hi)
            pts = self._shortcut(raw.waypoints)
            if key != (lo, hi):
                pts = list(reversed(pts))
            t = Trajectory.from_points(pts)
            self._short[key] = t
        return t

    def _descend(self, a: Point2, b: Point2) -> list:
        """Optimal cell path from a to b, preferring cells that hug the
        straight line between their cells (deviation, then remaining cost,
        then row/column).

        The deviation tie-break is an integer cross product in cell
        coordinates, so the selected path translates and quarter-rotates
        exactly with the workspace.
        """
        if a.dist(b) <= EPS:
            self._check_endpoint(a)
            return [a], 0.0
        ca = self._check_endpoint(a)
        cb = self._check_endpoint(b)
        A, D = self.field(cb)
        if A[ca] < 0:
            raise Unreachable(f"no path from ({a.x}, {a.y}) to ({b.x}, {b.y})")
        grid = self.grid
        path_cells = np.asarray(self._descend_cells(A, D, ca, cb))
        if len(path_cells) == 0:  # pragma: no cover - field guarantees an exit
            raise Unreachable("descent failed to reach the target cell")
        res = grid.resolution
        xs = grid.origin[0] + (path_cells[:, 1] + 0.5) * res
        ys = grid.origin[1] + (path_cells[:, 0] + 0.5) * res
        out = [(a[0], a[1])]
        cum = 0.0
        prev_cell = None
        for (cy, cx), x, y in zip(path_cells, xs, ys):
            px, py = out[-1]
            if abs(x - px) > 1e-12 or abs(y - py) > 1e-12:
                if prev_cell is not None:
                    cum += math.hypot(
                        (cx - prev_cell[1]) * res, (cy - prev_cell[0]) * res
                    )
                else:
                    cum += math.hypot(x - px, y - py)
                out.append((float(x), float(y)))
            prev_cell = (cy, cx)
        px, py = out[-1]
        if abs(b[0] - px) > 1e-12 or abs(b[1] - py) > 1e-12:
            cum += math.hypot(b[0] - px, b[1] - py)
            out.append((b[0], b[1]))
        return out, cum

    def _descend_cells(self, A, D, ca, cb):
        grid = self.grid
        if _HAVE_NUMBA:
            return _descend_cells_nb(grid.blocked, A, D, ca[0], ca[1], cb[0], cb[1])
        h, w = grid.height, grid.width
        ux = cb[1] - ca[1]
        uy = cb[0] - ca[0]
        path_cells = [ca]
        cur = ca
        guard = h * w + 8
        while cur != cb and guard > 0:
            guard -= 1
            a0, d0 = int(A[cur]), int(D[cur])
            best = None
            best_key = None
            for dy, dx, da, dd in _STEPS:
                ny, nx = cur[0] + dy, cur[1] + dx
                if not (0 <= ny < h and 0 <= nx < w) or grid.blocked[ny, nx]:
                    continue
                # edge lies on an optimal path iff step counts match exactly
                if int(A[ny, nx]) + da == a0 and int(D[ny, nx]) + dd == d0:
                    key = (
                        abs((nx - ca[1]) * uy - (ny - ca[0]) * ux),
                        int(A[ny, nx]) + int(D[ny, nx]) * SQRT2,
                        ny,
                        nx,
                    )
                    if best is None or key < best_key:
                        best, best_key = (ny, nx), key
            if best is None:
                return []
            path_cells.append(best)
            cur = best
        return path_cells

    def _shortcut(self, waypoints) -> list:
        pts = list(waypoints)
        if len(pts) <= 2:
            return pts
        out = [pts[0]]
        i = 0
        while i < len(pts) - 1:
            j = len(pts) - 1
            while j > i + 1 and not self.grid.segment_clear(pts[i], pts[j]):
                j -= 1
            out.append(pts[j])
            i = j
        return out


def plan_path(grid: OccupancyGrid, start, goal) -> Trajectory:
    """Minimum-cost 8-connected path with line-of-sight shortcutting."""
    return GridRouter(grid).plan(start, goal)


def raw_path(grid: OccupancyGrid, start, goal) -> Trajectory:
    """Pre-shortcut minimum-cost cell path (canonical tie resolution)."""
    return GridRouter(grid).raw_path(start, goal)


def grid_cost(grid: OccupancyGrid, start, goal) -> float:
    """Optimal raw grid cost; equals an independent Dijkstra bit for bit."""
    return GridRouter(grid).grid_cost(start, goal)


def path_cost(grid: OccupancyGrid, start, goal) -> float:
    """Cumulative cost of the shortcut trajectory between two points."""
    return plan_path(grid, start, goal).cumulative_cost


def observed_cost(prefix: Sequence) -> float:
    """Euclidean length of an observed polyline; no planning involved."""
    pts = [as_point(p) for p in prefix]
    if not pts:
        raise ValueError("observed prefix needs at least one point")
    return polyline_length(pts)
