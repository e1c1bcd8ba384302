"""The workspace configuration being optimized, plus its validity rules."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from .errors import InvalidResult
from .geometry import EPS, Point2, as_point
from .planner import GridRouter, OccupancyGrid, rasterize

#: per-template (grid resolution, agent radius) in meters
TEMPLATE_DEFAULTS = {
    "tabletop": (0.03, 0.04),
    "navigation": (0.1, 0.3),
}


@dataclass(frozen=True)
class Item:
    """A goal item: a labeled disc the human may reach for."""

    id: str
    pos: Point2
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "pos", as_point(self.pos))


@dataclass(frozen=True)
class Workspace:
    """Bounds, human start, goal items and obstacles of a shared workspace.

    ``bounds`` is ((xmin, ymin), (xmax, ymax)). Virtual obstacles are the
    reconfigurable barriers the optimizer places; fixed obstacles are part of
    the environment and never perturbed.
    """

    bounds: tuple
    start: Point2
    items: tuple
    virtual_obstacles: tuple = ()
    fixed_obstacles: tuple = ()
    template: str = "tabletop"

    def __post_init__(self):
        (xmin, ymin), (xmax, ymax) = self.bounds
        object.__setattr__(
            self,
            "bounds",
            (Point2(float(xmin), float(ymin)), Point2(float(xmax), float(ymax))),
        )
        object.__setattr__(self, "start", as_point(self.start))
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "virtual_obstacles", tuple(self.virtual_obstacles))
        object.__setattr__(self, "fixed_obstacles", tuple(self.fixed_obstacles))
        if self.template not in TEMPLATE_DEFAULTS:
            raise ValueError(f"unknown template {self.template!r}")

    @property
    def diagonal(self) -> float:
        (xmin, ymin), (xmax, ymax) = self.bounds
        return math.hypot(xmax - xmin, ymax - ymin)

    @property
    def resolution(self) -> float:
        return TEMPLATE_DEFAULTS[self.template][0]

    @property
    def agent_radius(self) -> float:
        return TEMPLATE_DEFAULTS[self.template][1]

    def item(self, item_id: str) -> Item:
        for it in self.items:
            if it.id == item_id:
                return it
        raise KeyError(item_id)

    def item_position(self, item_id: str) -> Point2:
        return self.item(item_id).pos

    def with_item_position(self, item_id: str, pos) -> "Workspace":
        items = tuple(
            replace(it, pos=as_point(pos)) if it.id == item_id else it
            for it in self.items
        )
        return replace(self, items=items)

    def obstacles(self) -> tuple:
        return self.virtual_obstacles + self.fixed_obstacles


# -- planner context cache ----------------------------------------------------

_ROUTER_CACHE: dict = {}
_ROUTER_CACHE_MAX = 64


def _grid_key(ws: Workspace) -> tuple:
    return (ws.bounds, ws.virtual_obstacles, ws.fixed_obstacles, ws.template)


def router_for(ws: Workspace) -> GridRouter:
    """Shared GridRouter for the workspace's obstacle layout.

    Item positions do not affect the grid, so workspaces differing only in
    item placement reuse the same rasterization and distance fields.
    """
    key = _grid_key(ws)
    router = _ROUTER_CACHE.get(key)
    if router is None:
        grid = rasterize(ws, ws.resolution, ws.agent_radius)
        router = GridRouter(grid)
        if len(_ROUTER_CACHE) >= _ROUTER_CACHE_MAX:
            _ROUTER_CACHE.pop(next(iter(_ROUTER_CACHE)))
        _ROUTER_CACHE[key] = router
    return router


def grid_for(ws: Workspace) -> OccupancyGrid:
    return router_for(ws).grid


def register_appended_obstacle_router(
    new_ws: Workspace, base_ws: Workspace, new_poly
) -> None:
    """Pre-seed the router cache when new_ws is base_ws plus one obstacle.

    Occupancy is an OR over per-polygon masks, so the derived grid is the
    base grid with just the new polygon blocked in; identical to a full
    rasterization, without re-testing every existing polygon.
    """
    import numpy as np

    from .planner import GridRouter, OccupancyGrid, _block_polygon

    key = _grid_key(new_ws)
    if key in _ROUTER_CACHE:
        return
    base = router_for(base_ws).grid
    blocked = base.blocked.copy()
    res = base.resolution
    xs = base.origin[0] + (np.arange(base.width) + 0.5) * res
    ys = base.origin[1] + (np.arange(base.height) + 0.5) * res
    _block_polygon(blocked, xs, ys, new_poly, new_ws.agent_radius)
    grid = OccupancyGrid(
        resolution=res,
        origin=base.origin,
        width=base.width,
        height=base.height,
        blocked=blocked,
    )
    if len(_ROUTER_CACHE) >= _ROUTER_CACHE_MAX:
        _ROUTER_CACHE.pop(next(iter(_ROUTER_CACHE)))
    _ROUTER_CACHE[key] = GridRouter(grid)


def workspace_violation(ws: Workspace) -> Optional[str]:
    """First violated invariant as a message, or None when the workspace is valid.

    Checks containment in bounds, pairwise item separation, item clearance
    from (item-radius-inflated) obstacles, an unblocked start, and
    reachability of every item from the start.
    """
    (xmin, ymin), (xmax, ymax) = ws.bounds
    if xmax - xmin <= EPS or ymax - ymin <= EPS:
        return "bounds enclose zero area"
    if not (xmin <= ws.start[0] <= xmax and ymin <= ws.start[1] <= ymax):
        return "start outside bounds"
    seen = set()
    for it in ws.items:
        if it.id in seen:
            return f"duplicate item id {it.id!r}"
        seen.add(it.id)
        if it.radius <= 0:
            return f"item {it.id!r} has non-positive radius"
        if not (
            xmin <= it.pos[0] - it.radius
            and it.pos[0] + it.radius <= xmax
            and ymin <= it.pos[1] - it.radius
            and it.pos[1] + it.radius <= ymax
        ):
            return f"item {it.id!r} outside bounds"
    for i, a in enumerate(ws.items):
        for b in ws.items[i + 1 :]:
            if a.pos.dist(b.pos) < a.radius + b.radius - EPS:
                return f"items {a.id!r} and {b.id!r} overlap"
    for poly in ws.obstacles():
        for v in poly.vertices:
            if not (xmin - EPS <= v[0] <= xmax + EPS and ymin - EPS <= v[1] <= ymax + EPS):
                return "obstacle vertex outside bounds"
        for it in ws.items:
            if poly.distance(it.pos) < it.radius - EPS:
                return f"item {it.id!r} intersects an obstacle"
    try:
        router = router_for(ws)
        grid = router.grid
        if grid.is_blocked(ws.start):
            return "start is blocked"
        # one field anchored at the start answers reachability for all items
        A, _ = router.field(grid.cell_of(ws.start))
        for it in ws.items:
            cell = grid.cell_of(it.pos)
            if grid.blocked[cell]:
                return f"item {it.id!r} sits in a blocked cell"
            if A[cell] < 0:
                return f"item {it.id!r} unreachable from start"
    except Exception as exc:  # rasterization/planning failure is a violation
        return f"planning failed: {exc}"
    return None


def workspace_valid(ws: Workspace) -> bool:
    return workspace_violation(ws) is None


def require_valid(ws: Workspace) -> Workspace:
    violation = workspace_violation(ws)
    if violation is not None:
        raise InvalidResult(violation)
    return ws
