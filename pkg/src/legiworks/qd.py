"""Archive-based quality-diversity search over workspace configurations.

The archive keeps one elite per cell of a 2D feature space (minimum
inter-item distance bin x item-ordering rank bin). Search alternates a random
initialization phase with an improvement phase that picks a random elite and
descends through sampled perturbations (Gaussian item moves, square obstacle
additions, obstacle removals) while any neighbor strictly improves.

Scores are stored internally as the negated task legibility (lower is
better); exports negate back so users always see higher-is-better legibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional

import numpy as np

from .errors import EmptyArchive, InvalidResult, PlacementFailure, TooFewItems
from .geometry import EPS, ConvexPolygon, Point2, merge_overlapping
from .legibility import LegibilityParams
from .task import ScoreConfig, Task, task_legibility
from .workspace import (
    Workspace,
    register_appended_obstacle_router,
    router_for,
    workspace_violation,
)


@dataclass(frozen=True)
class MeasureDescriptor:
    """Feature-space discretization for the archive.

    Feature 1 bins the minimum pairwise item distance over [0, diagonal/2].
    Feature 2 is the Lehmer rank of the item permutation read in rows from
    top to bottom (rows grouped within row_tolerance) and left to right,
    taken modulo ordering_cardinality.
    """

    min_distance_bins: int = 10
    ordering_cardinality: int = 720
    row_tolerance: Optional[float] = None

    def __post_init__(self):
        if self.min_distance_bins < 1 or self.ordering_cardinality < 1:
            raise ValueError("bin counts must be >= 1")

    def resolved_row_tolerance(self, workspace: Workspace) -> float:
        if self.row_tolerance is not None:
            return self.row_tolerance
        return 2.0 * max(it.radius for it in workspace.items)

    def shape(self) -> tuple:
        return (self.min_distance_bins, self.ordering_cardinality)


def lehmer_rank(perm) -> int:
    """Index of a permutation of 0..n-1 in lexicographic order."""
    perm = list(perm)
    n = len(perm)
    rank = 0
    for i in range(n):
        smaller = sum(1 for j in range(i + 1, n) if perm[j] < perm[i])
        rank += smaller * math.factorial(n - 1 - i)
    return rank


def reading_order(workspace: Workspace, row_tolerance: float) -> list:
    """Item declaration indices sorted top-to-bottom rows, left-to-right."""
    order = sorted(
        range(len(workspace.items)),
        key=lambda i: (-workspace.items[i].pos[1], workspace.items[i].pos[0]),
    )
    rows: List[list] = []
    row_ref = None
    for idx in order:
        y = workspace.items[idx].pos[1]
        if row_ref is None or row_ref - y > row_tolerance:
            rows.append([idx])
            row_ref = y
        else:
            rows[-1].append(idx)
    out = []
    for row in rows:
        out.extend(sorted(row, key=lambda i: workspace.items[i].pos[0]))
    return out


def measure_raw(workspace: Workspace, descriptor: MeasureDescriptor) -> tuple:
    """(minimum pairwise item distance, ordering Lehmer rank)."""
    if len(workspace.items) < 2:
        raise TooFewItems("measure needs at least 2 items")
    min_dist = min(
        a.pos.dist(b.pos)
        for i, a in enumerate(workspace.items)
        for b in workspace.items[i + 1 :]
    )
    perm = reading_order(workspace, descriptor.resolved_row_tolerance(workspace))
    rank = lehmer_rank(perm) % descriptor.ordering_cardinality
    return (min_dist, rank)


def measure(workspace: Workspace, descriptor: MeasureDescriptor) -> tuple:
    """Feature bin tuple (min_distance_bin, ordering_rank_bin)."""
    min_dist, rank = measure_raw(workspace, descriptor)
    upper = workspace.diagonal / 2.0
    width = upper / descriptor.min_distance_bins
    # a distance on a bin boundary belongs to the bin it opens; the epsilon
    # absorbs float noise in boundary-exact distances
    dist_bin = min(
        int(min_dist / width + 1e-9), descriptor.min_distance_bins - 1
    )
    return (dist_bin, rank % descriptor.ordering_cardinality)


# -- perturbations -------------------------------------------------------------


@dataclass(frozen=True)
class MoveItem:
    item_id: str
    new_pos: Point2


@dataclass(frozen=True)
class AddObstacle:
    polygon: ConvexPolygon


@dataclass(frozen=True)
class RemoveObstacle:
    index: int


@dataclass(frozen=True)
class QDConfig:
    """Search budget and perturbation parameters.

    gaussian_sigma defaults to 5% of the smaller bounds dimension and
    obstacle_side to 8x the largest item radius when left unset.
    """

    total_iterations: int = 2000
    init_iterations: int = 400
    seed: int = 0
    gaussian_sigma: Optional[float] = None
    item_samples_per_item: int = 4
    obstacle_add_samples: int = 4
    obstacle_side: Optional[float] = None
    max_obstacles: int = 6
    max_orders: int = 500
    score_current_goal_only: bool = False
    placement_retries: int = 1000
    descent_depth: int = 50

    def __post_init__(self):
        if not 0 < self.init_iterations < self.total_iterations + 1:
            raise ValueError("need 0 < init_iterations <= total_iterations")
        if self.item_samples_per_item < 1 or self.obstacle_add_samples < 1:
            raise ValueError("perturbation sample counts must be >= 1")
        if self.gaussian_sigma is not None and self.gaussian_sigma <= 0:
            raise ValueError("gaussian_sigma must be > 0")

    def resolved_sigma(self, workspace: Workspace) -> float:
        if self.gaussian_sigma is not None:
            return self.gaussian_sigma
        (xmin, ymin), (xmax, ymax) = workspace.bounds
        return 0.05 * min(xmax - xmin, ymax - ymin)

    def resolved_obstacle_side(self, workspace: Workspace) -> float:
        if self.obstacle_side is not None:
            return self.obstacle_side
        return 8.0 * max(it.radius for it in workspace.items)


@dataclass
class ArchiveCell:
    workspace: Workspace
    score: float  # internal, lower is better
    features: tuple  # raw feature values

    @property
    def legibility(self) -> float:
        return -self.score


@dataclass
class Archive:
    """One elite per feature bin; scores are internal (lower is better)."""

    descriptor: MeasureDescriptor
    cells: Dict[tuple, ArchiveCell] = field(default_factory=dict)

    def insert(self, key: tuple, workspace: Workspace, score: float, features) -> bool:
        cell = self.cells.get(key)
        if cell is None or score < cell.score:
            self.cells[key] = ArchiveCell(workspace, score, tuple(features))
            return True
        return False

    def best(self) -> ArchiveCell:
        if not self.cells:
            raise EmptyArchive("archive holds no elites")
        return min(self.cells.values(), key=lambda c: c.score)

    def sorted_keys(self) -> list:
        return sorted(self.cells)

    def __len__(self) -> int:
        return len(self.cells)


def random_workspace(
    base: Workspace, config: QDConfig, rng: np.random.Generator
) -> Workspace:
    """Fresh workspace on the base's bounds/items via rejection sampling.

    Virtual obstacles are sampled first (fixed-size axis-aligned squares,
    merged when overlapping), then item positions one by one. Every accepted
    sample satisfies the full workspace invariants.
    """
    (xmin, ymin), (xmax, ymax) = base.bounds
    side = config.resolved_obstacle_side(base)
    for _ in range(config.placement_retries):
        n_obstacles = int(rng.integers(0, config.max_obstacles + 1))
        polys = []
        half = side / 2.0
        if xmax - xmin > side and ymax - ymin > side:
            for _ in range(n_obstacles):
                cx = rng.uniform(xmin + half, xmax - half)
                cy = rng.uniform(ymin + half, ymax - half)
                polys.append(ConvexPolygon.axis_aligned_square((cx, cy), side))
        obstacles = tuple(merge_overlapping(polys)) if polys else ()
        candidate = replace(base, virtual_obstacles=obstacles)
        items = []
        ok = True
        for it in base.items:
            placed = None
            for _ in range(config.placement_retries):
                px = rng.uniform(xmin + it.radius, xmax - it.radius)
                py = rng.uniform(ymin + it.radius, ymax - it.radius)
                pos = Point2(px, py)
                if any(
                    pos.dist(other.pos) < it.radius + other.radius
                    for other in items
                ):
                    continue
                if any(
                    poly.distance(pos) < max(it.radius, base.agent_radius) + 1e-9
                    for poly in obstacles + tuple(base.fixed_obstacles)
                ):
                    continue
                placed = replace(it, pos=pos)
                break
            if placed is None:
                ok = False
                break
            items.append(placed)
        if not ok:
            continue
        candidate = replace(candidate, items=tuple(items))
        if workspace_violation(candidate) is None:
            return candidate
    raise PlacementFailure("could not sample a valid workspace")


def available_perturbations(
    workspace: Workspace, config: QDConfig, rng: np.random.Generator
) -> list:
    """Candidate edits: K Gaussian moves per item, M square additions while
    below max_obstacles, and one removal per existing virtual obstacle."""
    sigma = config.resolved_sigma(workspace)
    side = config.resolved_obstacle_side(workspace)
    (xmin, ymin), (xmax, ymax) = workspace.bounds
    perturbations: list = []
    k = config.item_samples_per_item
    offsets = rng.normal(0.0, sigma, size=(len(workspace.items) * k, 2))
    for i, it in enumerate(workspace.items):
        for dx, dy in offsets[i * k : (i + 1) * k]:
            perturbations.append(
                MoveItem(it.id, Point2(it.pos[0] + dx, it.pos[1] + dy))
            )
    if len(workspace.virtual_obstacles) < config.max_obstacles:
        half = side / 2.0
        if xmax - xmin > side and ymax - ymin > side:
            centers = rng.uniform(
                (xmin + half, ymin + half),
                (xmax - half, ymax - half),
                size=(config.obstacle_add_samples, 2),
            )
            for cx, cy in centers:
                perturbations.append(
                    AddObstacle(ConvexPolygon.axis_aligned_square((cx, cy), side))
                )
    for index in range(len(workspace.virtual_obstacles)):
        perturbations.append(RemoveObstacle(index))
    return perturbations


def _moved_item_violation(ws: Workspace, item_id: str) -> Optional[str]:
    """Workspace-invariant check confined to the moved item.

    Obstacles and the other items are untouched by a move, so this is
    equivalent to the full invariant check when the input workspace was valid.
    Epsilon semantics mirror workspace_violation exactly.
    """
    it = ws.item(item_id)
    (xmin, ymin), (xmax, ymax) = ws.bounds
    if not (
        xmin <= it.pos[0] - it.radius
        and it.pos[0] + it.radius <= xmax
        and ymin <= it.pos[1] - it.radius
        and it.pos[1] + it.radius <= ymax
    ):
        return f"item {item_id!r} outside bounds"
    for other in ws.items:
        if other.id != item_id and it.pos.dist(other.pos) < it.radius + other.radius - EPS:
            return f"items {item_id!r} and {other.id!r} overlap"
    for poly in ws.obstacles():
        if poly.distance(it.pos) < it.radius - EPS:
            return f"item {item_id!r} intersects an obstacle"
    try:
        router = router_for(ws)
        if router.grid.is_blocked(it.pos):
            return f"item {item_id!r} sits in a blocked cell"
        if not router.reachable(ws.start, it.pos):
            return f"item {item_id!r} unreachable from start"
    except Exception as exc:
        return f"planning failed: {exc}"
    return None


def apply_perturbation(workspace: Workspace, perturbation) -> Workspace:
    """Apply one edit, re-merge overlapping obstacles, re-validate.

    Raises InvalidResult when the perturbed workspace violates any invariant;
    callers skip such candidates rather than repairing them.
    """
    if isinstance(perturbation, MoveItem):
        out = workspace.with_item_position(perturbation.item_id, perturbation.new_pos)
        violation = _moved_item_violation(out, perturbation.item_id)
        if violation is not None:
            raise InvalidResult(violation)
        return out
    if isinstance(perturbation, AddObstacle):
        # cheap geometric rejection before any merging or rasterization;
        # only conditions the full validation is guaranteed to reject too
        poly = perturbation.polygon
        res = workspace.resolution
        for it in workspace.items:
            if poly.distance(it.pos) < it.radius - EPS:
                raise InvalidResult(f"item {it.id!r} intersects an obstacle")
        if poly.distance(workspace.start) < workspace.agent_radius - res:
            raise InvalidResult("start is blocked")
        merged = merge_overlapping(
            list(workspace.virtual_obstacles) + [perturbation.polygon]
        )
        out = replace(workspace, virtual_obstacles=tuple(merged))
        if len(merged) == len(workspace.virtual_obstacles) + 1:
            old = set(workspace.virtual_obstacles)
            added = [p for p in merged if p not in old]
            if len(added) == 1:
                register_appended_obstacle_router(out, workspace, added[0])
    elif isinstance(perturbation, RemoveObstacle):
        if not 0 <= perturbation.index < len(workspace.virtual_obstacles):
            raise InvalidResult("obstacle index out of range")
        kept = tuple(
            p
            for i, p in enumerate(workspace.virtual_obstacles)
            if i != perturbation.index
        )
        out = replace(workspace, virtual_obstacles=kept)
    else:
        raise InvalidResult(f"unknown perturbation {perturbation!r}")
    violation = workspace_violation(out)
    if violation is not None:
        raise InvalidResult(violation)
    return out


def _build_obstacle_candidate(workspace: Workspace, perturbation):
    """Geometry-validated obstacle edit, or None when it cannot validate.

    Planner-side invariants (blocked cells, reachability) are left to the
    batched evaluator, which reports them as invalid scores; the union of
    both checks equals the full workspace validation.
    """
    if isinstance(perturbation, AddObstacle):
        poly = perturbation.polygon
        res = workspace.resolution
        for it in workspace.items:
            if poly.distance(it.pos) < it.radius - EPS:
                return None
        if poly.distance(workspace.start) < workspace.agent_radius - res:
            return None
        merged = merge_overlapping(
            list(workspace.virtual_obstacles) + [poly]
        )
        out = replace(workspace, virtual_obstacles=tuple(merged))
        # merging can grow hulls over items the raw polygon missed
        for hull in merged:
            for it in workspace.items:
                if hull.distance(it.pos) < it.radius - EPS:
                    return None
        if len(merged) == len(workspace.virtual_obstacles) + 1:
            old = set(workspace.virtual_obstacles)
            added = [p for p in merged if p not in old]
            if len(added) == 1:
                register_appended_obstacle_router(out, workspace, added[0])
        return out
    if isinstance(perturbation, RemoveObstacle):
        if not 0 <= perturbation.index < len(workspace.virtual_obstacles):
            return None
        kept = tuple(
            p
            for i, p in enumerate(workspace.virtual_obstacles)
            if i != perturbation.index
        )
        return replace(workspace, virtual_obstacles=kept)
    return None


@dataclass(frozen=True)
class ImproveResult:
    workspace: Workspace
    score: float
    truncated: bool


def improve_via_gradient_descent(
    workspace: Workspace,
    objective: Callable[[Workspace], float],
    config: QDConfig,
    rng: np.random.Generator,
) -> ImproveResult:
    """Steepest descent over sampled perturbations.

    Evaluates the objective on every valid perturbed neighbor and adopts the
    best strictly improving one, resampling perturbations each round, until no
    sampled neighbor improves or the depth cap is hit.

    Item-move candidates are evaluated through the objective's batched fast
    path when it provides one (see _fastround); results are identical to
    applying and scoring each candidate individually.
    """
    fast = getattr(objective, "fast_evaluator", lambda: None)()
    current = workspace
    best_score = objective(current)
    for _ in range(config.descent_depth):
        perturbations = available_perturbations(current, config, rng)
        values = [math.nan] * len(perturbations)
        move_indices = [
            i for i, p in enumerate(perturbations) if isinstance(p, MoveItem)
        ]
        batched = False
        if fast is not None and move_indices:
            ctx = fast.prepare(current)
            if ctx is not None:
                scores = fast.evaluate(
                    ctx,
                    [perturbations[i].item_id for i in move_indices],
                    [perturbations[i].new_pos for i in move_indices],
                )
                if scores is not None:
                    for i, s in zip(move_indices, scores):
                        values[i] = s
                    batched = True
        for i, perturbation in enumerate(perturbations):
            if batched and isinstance(perturbation, MoveItem):
                continue
            if fast is not None and isinstance(
                perturbation, (AddObstacle, RemoveObstacle)
            ):
                candidate = _build_obstacle_candidate(current, perturbation)
                if candidate is not None:
                    values[i] = fast.evaluate_fresh(candidate)
                continue
            try:
                candidate = apply_perturbation(current, perturbation)
            except InvalidResult:
                continue
            values[i] = objective(candidate)
        best_index = None
        neighbor_score = best_score
        for i, value in enumerate(values):
            if not math.isnan(value) and value < neighbor_score:
                best_index, neighbor_score = i, value
        if best_index is None:
            return ImproveResult(current, best_score, False)
        current = apply_perturbation(current, perturbations[best_index])
        best_score = neighbor_score
    return ImproveResult(current, best_score, True)


def map_elites(
    objective: Callable[[Workspace], float],
    descriptor: MeasureDescriptor,
    config: QDConfig,
    base: Workspace,
    progress: Optional[Callable[[int, Archive], None]] = None,
) -> Archive:
    """Archive search: random initialization then elite improvement.

    Insertion replaces a cell's occupant only on strict improvement, so
    per-cell scores never worsen. The run is fully determined by the config
    seed.
    """
    rng = np.random.default_rng(config.seed)
    archive = Archive(descriptor)
    for iteration in range(1, config.total_iterations + 1):
        if iteration <= config.init_iterations:
            try:
                candidate = random_workspace(base, config, rng)
            except PlacementFailure:
                continue
            score = objective(candidate)
        else:
            if not archive.cells:
                raise EmptyArchive("no valid workspace was ever inserted")
            keys = archive.sorted_keys()
            elite = archive.cells[keys[int(rng.integers(0, len(keys)))]]
            result = improve_via_gradient_descent(
                elite.workspace, objective, config, rng
            )
            candidate, score = result.workspace, result.score
        features = measure_raw(candidate, descriptor)
        key = measure(candidate, descriptor)
        archive.insert(key, candidate, score, features)
        if progress is not None:
            progress(iteration, archive)
    if not archive.cells:
        raise EmptyArchive("no valid workspace was ever inserted")
    return archive


class LegibilityObjective:
    """Internal (negated, lower-is-better) task legibility of a workspace.

    Keeps a per-step score cache across evaluations so neighboring
    workspaces (one item moved, everything else equal) only recompute the
    steps whose goal set contains the moved item.
    """

    _CACHE_LIMIT = 400_000

    def __init__(
        self,
        task: Task,
        params: LegibilityParams,
        score_config: ScoreConfig,
    ):
        from .task import _walk_plan

        self.task = task
        self.params = params
        self.score_config = score_config
        self._step_cache: Dict[tuple, float] = {}
        self._fast = None
        self._plan = _walk_plan(
            task,
            score_config.return_home,
            score_config.score_current_goal_only,
            score_config.max_orders,
            score_config.order_seed,
        )

    def fast_evaluator(self):
        """Batched move-candidate evaluator when this walk supports one."""
        if self._fast is None:
            from ._fastround import FastMoveEvaluator

            evaluator = FastMoveEvaluator(self)
            self._fast = evaluator if evaluator.supported else False
        return self._fast or None

    def __call__(self, workspace: Workspace) -> float:
        if len(self._step_cache) > self._CACHE_LIMIT:
            self._step_cache.clear()
        return -task_legibility(
            workspace,
            self.task,
            self.params,
            self.score_config,
            self._step_cache,
            self._plan,
        )

    def legibility(self, workspace: Workspace) -> float:
        return -self(workspace)
