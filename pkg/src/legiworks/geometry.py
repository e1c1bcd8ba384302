"""2D primitives: points, convex polygons, hulls, overlap tests and obstacle merging.

All predicates are epsilon-based (EPS = 1e-9 in meters); exact arithmetic is
deliberately out of scope at workspace scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateInput

EPS = 1e-9

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False


class Point2(NamedTuple):
    x: float
    y: float

    def __add__(self, other):
        return Point2(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Point2(self.x - other[0], self.y - other[1])

    def dist(self, other: "Point2") -> float:
        return math.hypot(self.x - other[0], self.y - other[1])


def as_point(p) -> Point2:
    return p if isinstance(p, Point2) else Point2(float(p[0]), float(p[1]))


def cross(o: Point2, a: Point2, b: Point2) -> float:
    """z-component of (a - o) x (b - o); > 0 when o->a->b turns left."""
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def polyline_length(points: Sequence) -> float:
    total = 0.0
    for p, q in zip(points, points[1:]):
        total += math.hypot(q[0] - p[0], q[1] - p[1])
    return total


def segment_point_distance(a: Point2, b: Point2, p: Point2) -> float:
    ax, ay = a[0], a[1]
    dx, dy = b[0] - ax, b[1] - ay
    L2 = dx * dx + dy * dy
    if L2 <= EPS * EPS:
        return math.hypot(p[0] - ax, p[1] - ay)
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / L2
    t = min(1.0, max(0.0, t))
    return math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy))


@dataclass(frozen=True)
class ConvexPolygon:
    """Strictly convex polygon, counterclockwise, canonical vertex rotation.

    The constructor normalizes winding, drops repeated and collinear vertices,
    and rotates the vertex list to start at the lexicographically smallest
    vertex, so equal regions compare and serialize identically.
    """

    vertices: tuple

    def __init__(self, vertices: Iterable):
        pts = [as_point(v) for v in vertices]
        for p in pts:
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise DegenerateInput("non-finite vertex coordinate")
        pts = _dedupe_ring(pts)
        if len(pts) < 3:
            raise DegenerateInput("fewer than 3 distinct vertices")
        if _signed_area(pts) < 0:
            pts.reverse()
        pts = _drop_collinear(pts)
        if len(pts) < 3:
            raise DegenerateInput("polygon collapses to a segment")
        for i in range(len(pts)):
            if cross(pts[i - 1], pts[i], pts[(i + 1) % len(pts)]) <= EPS:
                raise DegenerateInput("polygon is not strictly convex")
        start = min(range(len(pts)), key=lambda i: pts[i])
        object.__setattr__(self, "vertices", tuple(pts[start:] + pts[:start]))

    def area(self) -> float:
        return _signed_area(list(self.vertices))

    def centroid(self) -> Point2:
        xs = sum(v.x for v in self.vertices) / len(self.vertices)
        ys = sum(v.y for v in self.vertices) / len(self.vertices)
        return Point2(xs, ys)

    def contains(self, p, tol: float = EPS) -> bool:
        """Closed-region membership: boundary points count as inside."""
        p = as_point(p)
        vs = self.vertices
        for i in range(len(vs)):
            if cross(vs[i], vs[(i + 1) % len(vs)], p) < -tol:
                return False
        return True

    def vertex_array(self) -> np.ndarray:
        arr = getattr(self, "_verts_np", None)
        if arr is None:
            arr = np.asarray(self.vertices, dtype=float)
            object.__setattr__(self, "_verts_np", arr)
        return arr

    def bbox(self) -> tuple:
        box = getattr(self, "_bbox", None)
        if box is None:
            xs = [v[0] for v in self.vertices]
            ys = [v[1] for v in self.vertices]
            box = (min(xs), min(ys), max(xs), max(ys))
            object.__setattr__(self, "_bbox", box)
        return box

    def distance(self, p) -> float:
        """Euclidean distance from p to the closed region (0 if inside)."""
        if _HAVE_NUMBA:
            return _point_polygon_distance(
                self.vertex_array(), float(p[0]), float(p[1])
            )
        p = as_point(p)
        if self.contains(p):
            return 0.0
        vs = self.vertices
        return min(
            segment_point_distance(vs[i], vs[(i + 1) % len(vs)], p)
            for i in range(len(vs))
        )

    @staticmethod
    def axis_aligned_square(center, side: float) -> "ConvexPolygon":
        cx, cy = center[0], center[1]
        h = side / 2.0
        return ConvexPolygon(
            [(cx - h, cy - h), (cx + h, cy - h), (cx + h, cy + h), (cx - h, cy + h)]
        )


@dataclass(frozen=True)
class Disc:
    """Circular footprint used for goal items and agents."""

    center: Point2
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not self.radius > 0:
            raise DegenerateInput("disc radius must be > 0")

    def overlaps(self, other: "Disc") -> bool:
        return self.center.dist(other.center) < self.radius + other.radius - EPS

    def intersects_polygon(self, poly: ConvexPolygon) -> bool:
        return poly.distance(self.center) < self.radius - EPS


def _dedupe_ring(pts):
    out = []
    for p in pts:
        if not out or out[-1].dist(p) > EPS:
            out.append(p)
    if len(out) > 1 and out[0].dist(out[-1]) <= EPS:
        out.pop()
    return out


def _signed_area(pts) -> float:
    s = 0.0
    for i in range(len(pts)):
        a, b = pts[i], pts[(i + 1) % len(pts)]
        s += a[0] * b[1] - b[0] * a[1]
    return s / 2.0


def _drop_collinear(pts):
    out = list(pts)
    changed = True
    while changed and len(out) >= 3:
        changed = False
        for i in range(len(out)):
            a = out[i - 1]
            b = out[i]
            c = out[(i + 1) % len(out)]
            if abs(cross(a, b, c)) <= EPS:
                del out[i]
                changed = True
                break
    return out


if _HAVE_NUMBA:

    @_njit(cache=True)
    def _point_polygon_distance(verts, px, py):  # pragma: no cover - jitted
        n = verts.shape[0]
        inside = True
        for i in range(n):
            ax, ay = verts[i, 0], verts[i, 1]
            j = i + 1 if i + 1 < n else 0
            bx, by = verts[j, 0], verts[j, 1]
            if (bx - ax) * (py - ay) - (by - ay) * (px - ax) < -1e-9:
                inside = False
                break
        if inside:
            return 0.0
        best = 1e300
        for i in range(n):
            ax, ay = verts[i, 0], verts[i, 1]
            j = i + 1 if i + 1 < n else 0
            bx, by = verts[j, 0], verts[j, 1]
            dx, dy = bx - ax, by - ay
            L2 = dx * dx + dy * dy
            if L2 <= 1e-18:
                d = np.hypot(px - ax, py - ay)
            else:
                t = ((px - ax) * dx + (py - ay) * dy) / L2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
                d = np.hypot(px - (ax + t * dx), py - (ay + t * dy))
            if d < best:
                best = d
        return best


def convex_hull(points: Iterable) -> ConvexPolygon:
    """Convex hull of a point set by Andrew's monotone chain.

    Raises DegenerateInput when fewer than 3 distinct points remain or all
    points are collinear. Collinear boundary points are not kept as vertices.
    """
    pts = sorted({(float(p[0]), float(p[1])) for p in points})
    pts = [Point2(x, y) for x, y in pts]
    if len(pts) < 3:
        raise DegenerateInput("convex hull needs >= 3 distinct points")

    def half(seq):
        # exact comparison here: an epsilon pop could discard a true extreme
        # vertex of a nearly-degenerate set; near-collinear cleanup happens
        # ring-wise in the ConvexPolygon constructor instead
        chain = []
        for p in seq:
            while len(chain) >= 2 and cross(chain[-2], chain[-1], p) <= 0.0:
                chain.pop()
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(reversed(pts))
    ring = lower[:-1] + upper[:-1]
    if len(ring) < 3:
        raise DegenerateInput("points are collinear")
    return ConvexPolygon(ring)


def polygons_overlap(a: ConvexPolygon, b: ConvexPolygon) -> bool:
    """True iff the closed regions intersect; shared boundary counts as overlap.

    Separating-axis test over both polygons' edge normals: the polygons are
    disjoint only when some axis separates the projections by more than EPS.
    """
    ax0, ay0, ax1, ay1 = a.bbox()
    bx0, by0, bx1, by1 = b.bbox()
    if bx0 - ax1 > EPS or ax0 - bx1 > EPS or by0 - ay1 > EPS or ay0 - by1 > EPS:
        return False
    for poly, other in ((a, b), (b, a)):
        vs = poly.vertices
        for i in range(len(vs)):
            ex = vs[(i + 1) % len(vs)][0] - vs[i][0]
            ey = vs[(i + 1) % len(vs)][1] - vs[i][1]
            nx, ny = -ey, ex
            pmax = max(nx * v[0] + ny * v[1] for v in poly.vertices)
            omin = min(nx * v[0] + ny * v[1] for v in other.vertices)
            norm = math.hypot(nx, ny)
            if omin - pmax > EPS * norm:
                return False
    return True


def merge_overlapping(obstacles: Sequence[ConvexPolygon]) -> list:
    """Replace overlapping polygons with the hull of their combined vertices.

    Runs to a fixed point because a merge can create new overlaps. The result
    is sorted canonically so it does not depend on input order.
    """
    polys = list(obstacles)
    merged = True
    while merged:
        merged = False
        for i in range(len(polys)):
            for j in range(i + 1, len(polys)):
                if polygons_overlap(polys[i], polys[j]):
                    combined = convex_hull(
                        list(polys[i].vertices) + list(polys[j].vertices)
                    )
                    rest = [p for k, p in enumerate(polys) if k not in (i, j)]
                    polys = rest + [combined]
                    merged = True
                    break
            if merged:
                break
    return sorted(polys, key=lambda p: p.vertices[0])


def polygon_distance_batch(poly: ConvexPolygon, pts: np.ndarray) -> np.ndarray:
    """Distances from an (N, 2) array of points to the closed polygon region."""
    vs = np.asarray(poly.vertices, dtype=float)
    n = len(vs)
    px = pts[:, 0][:, None]
    py = pts[:, 1][:, None]
    ax, ay = vs[:, 0][None, :], vs[:, 1][None, :]
    bx = np.roll(vs[:, 0], -1)[None, :]
    by = np.roll(vs[:, 1], -1)[None, :]
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    t = ((px - ax) * dx + (py - ay) * dy) / np.where(L2 > 0, L2, 1.0)
    t = np.clip(t, 0.0, 1.0)
    seg_d = np.hypot(px - (ax + t * dx), py - (ay + t * dy))
    dist = seg_d.min(axis=1)
    crossz = dx * (py - ay) - dy * (px - ax)
    inside = (crossz >= -EPS).all(axis=1)
    dist[inside] = 0.0
    return dist
