"""Independent reference implementations used to freeze expected values.

Everything here is deliberately written against the documented contracts,
not against the engine internals: brute-force geometry checks, a plain
heap-based Dijkstra with exact step counts, direct goal-inference
arithmetic, and permutation filtering for order enumeration.
"""

import heapq
import itertools
import math

import numpy as np

SQRT2 = math.sqrt(2.0)


def hull_contains_all(hull_vertices, points, tol=1e-9):
    """Every point on the inner side of every hull edge (O(n*h) check).

    The tolerance scales with edge length to match epsilon-based collinearity
    predicates (a point dropped as collinear may sit ~eps outside the edge).
    """
    vs = list(hull_vertices)
    for p in points:
        for i in range(len(vs)):
            a, b = vs[i], vs[(i + 1) % len(vs)]
            cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
            edge = math.hypot(b[0] - a[0], b[1] - a[1])
            if cross < -tol * (1.0 + edge):
                return False
    return True


def point_in_convex(vertices, p, tol=1e-9):
    vs = list(vertices)
    for i in range(len(vs)):
        a, b = vs[i], vs[(i + 1) % len(vs)]
        cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
        if cross < -tol:
            return False
    return True


def polygons_overlap_sampled(a_vertices, b_vertices, n=120):
    """Overlap by dense point sampling over the first polygon's bounding box."""
    xs = [v[0] for v in a_vertices]
    ys = [v[1] for v in a_vertices]
    for i in range(n + 1):
        for j in range(n + 1):
            x = min(xs) + (max(xs) - min(xs)) * i / n
            y = min(ys) + (max(ys) - min(ys)) * j / n
            if point_in_convex(a_vertices, (x, y)) and point_in_convex(
                b_vertices, (x, y)
            ):
                return True
    return False


def shoelace_area(vertices):
    s = 0.0
    vs = list(vertices)
    for i in range(len(vs)):
        a, b = vs[i], vs[(i + 1) % len(vs)]
        s += a[0] * b[1] - b[0] * a[1]
    return abs(s) / 2.0


def dijkstra_counts(blocked, source):
    """Exact (axis, diagonal) step counts of optimal 8-connected paths.

    Plain heapq Dijkstra, independent of the engine's field computation.
    """
    h, w = blocked.shape
    INF = None
    best = {}
    sy, sx = source
    if blocked[sy, sx]:
        return best
    heap = [(0.0, 0, 0, sy, sx)]
    steps = [
        (-1, 0, 1, 0), (1, 0, 1, 0), (0, -1, 1, 0), (0, 1, 1, 0),
        (-1, -1, 0, 1), (-1, 1, 0, 1), (1, -1, 0, 1), (1, 1, 0, 1),
    ]
    done = set()
    best[(sy, sx)] = (0, 0)
    while heap:
        _, a, d, cy, cx = heapq.heappop(heap)
        if (cy, cx) in done:
            continue
        done.add((cy, cx))
        a, d = best[(cy, cx)]
        for dy, dx, da, dd in steps:
            ny, nx = cy + dy, cx + dx
            if 0 <= ny < h and 0 <= nx < w and not blocked[ny, nx]:
                if (ny, nx) in done:
                    continue
                na, nd = a + da, d + dd
                nv = na + nd * SQRT2
                cur = best.get((ny, nx))
                if cur is None or nv < cur[0] + cur[1] * SQRT2:
                    best[(ny, nx)] = (na, nd)
                    heapq.heappush(heap, (nv, na, nd, ny, nx))
    return best


def dijkstra_cost(blocked, source, target, resolution):
    """Optimal grid cost, formed canonically as a*res + d*(res*sqrt(2))."""
    best = dijkstra_counts(blocked, source)
    if target not in best:
        return None
    a, d = best[target]
    return a * resolution + d * (resolution * SQRT2)


def cell_of(origin, resolution, p):
    return (
        int(math.floor((p[1] - origin[1]) / resolution)),
        int(math.floor((p[0] - origin[0]) / resolution)),
    )


def polyline_length(points):
    return sum(
        math.hypot(q[0] - p[0], q[1] - p[1]) for p, q in zip(points, points[1:])
    )


def brute_force_posterior(grid_blocked, origin, resolution, diagonal,
                          start, observed, goal_positions, beta):
    """Goal posterior from first principles: Dijkstra costs + explicit math.

    goal_positions: mapping goal id -> (x, y). Returns dict goal id -> prob.
    """
    q = observed[-1]
    c_obs = polyline_length(observed)
    weights = {}
    for goal, pos in goal_positions.items():
        gcell = cell_of(origin, resolution, pos)
        field = dijkstra_counts(grid_blocked, gcell)
        qcell = cell_of(origin, resolution, q)
        scell = cell_of(origin, resolution, start)
        if qcell not in field or scell not in field:
            raise AssertionError(f"goal {goal} unreachable in oracle")
        a, d = field[qcell]
        c_qg = a * resolution + d * (resolution * SQRT2)
        a, d = field[scell]
        c_sg = a * resolution + d * (resolution * SQRT2)
        weights[goal] = math.exp(-beta * (c_obs + c_qg - c_sg) / diagonal)
    total = sum(weights.values())
    return {g: w / total for g, w in weights.items()}


def env_legibility_reference(grid_blocked, origin, resolution, diagonal,
                             start, g_true, goal_positions, beta, penalty,
                             checkpoints, approach_waypoints):
    """Checkpoint scoring from first principles along a given approach path."""
    total_cost = polyline_length(approach_waypoints)
    out = 0.0
    for f in checkpoints:
        target = f * total_cost
        acc = 0.0
        prefix = [approach_waypoints[0]]
        for p, qq in zip(approach_waypoints, approach_waypoints[1:]):
            seg = math.hypot(qq[0] - p[0], qq[1] - p[1])
            if acc + seg >= target and seg > 0:
                t = (target - acc) / seg
                prefix.append((p[0] + t * (qq[0] - p[0]), p[1] + t * (qq[1] - p[1])))
                break
            prefix.append(qq)
            acc += seg
        probs = brute_force_posterior(
            grid_blocked, origin, resolution, diagonal,
            start, prefix, goal_positions, beta,
        )
        p_true = probs[g_true]
        if any(g != g_true and p >= p_true for g, p in probs.items()):
            out += -penalty
        else:
            ordered = sorted(probs.values())
            out += 1.0 if len(ordered) < 2 else ordered[-1] - ordered[-2]
    return out / len(checkpoints)


def all_valid_orders_bruteforce(ids, edges):
    """Filter all permutations by the precedence predicate."""
    out = []
    for perm in itertools.permutations(ids):
        pos = {t: i for i, t in enumerate(perm)}
        if all(pos[a] < pos[b] for a, b in edges):
            out.append(perm)
    return out


def lehmer_rank_by_enumeration(perm):
    """Index of perm among all sorted permutations of its elements."""
    ref = sorted(itertools.permutations(sorted(perm)))
    return ref.index(tuple(perm))


def random_convex_polygon(rng, center, radius, n_verts=None):
    """Convex polygon from a random angular fan around a center."""
    n = int(n_verts if n_verts is not None else rng.integers(3, 7))
    angles = np.sort(rng.uniform(0, 2 * math.pi, n))
    if np.min(np.diff(angles, append=angles[0] + 2 * math.pi)) < 0.15:
        angles = np.linspace(0, 2 * math.pi, n, endpoint=False) + rng.uniform(0, 1)
    radii = rng.uniform(0.5 * radius, radius, n)
    return [
        (center[0] + r * math.cos(a), center[1] + r * math.sin(a))
        for a, r in zip(angles, radii)
    ]
