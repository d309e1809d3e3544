"""Planning: grid A*, viewpoint generation, greedy waypoint ordering, frontiers.

Paths are 8-connected over observed-free cells; unknown space never counts as
traversable.  Navigation-facing callers pass an obstacle-inflated traversable
mask so the point robot keeps its physical radius away from walls.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .errors import DomainError, NoPathError
from .sensing import BeliefMap, BeliefState, DetectionRecord
from .world import HyperParams, PlannerParams, Pose, normalize_angle

SQRT2 = math.sqrt(2.0)
COST_FLOOR = 1e-3  # keeps the co-occurrence penalty positive at cooccur = 1

_NEIGHBORS = (
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, SQRT2),
    (1, -1, SQRT2),
    (-1, 1, SQRT2),
    (-1, -1, SQRT2),
)


@dataclass(frozen=True)
class Viewpoint:
    """A pose from which a landmark is observable, with its planning scores."""

    landmark_id: str
    landmark_name: str
    pose: Pose
    cooccur: float
    sem_uncert: float
    detection: DetectionRecord | None = None

    def __post_init__(self) -> None:
        if not -1.0 <= self.cooccur <= 1.0:
            raise DomainError(f"cooccur {self.cooccur} outside [-1, 1]")
        if self.sem_uncert < 0.0:
            raise DomainError(f"sem_uncert {self.sem_uncert} must be >= 0")


@dataclass(frozen=True)
class Path:
    """Cells of an 8-connected grid path and its metric length."""

    cells: tuple[tuple[int, int], ...]
    length: float

    @classmethod
    def from_cells(cls, cells: Sequence[tuple[int, int]], resolution: float) -> "Path":
        if not cells:
            raise DomainError("a path needs at least one cell")
        length = 0.0
        straight = diagonal = 0
        for (ax, ay), (bx, by) in zip(cells, cells[1:]):
            dx, dy = abs(bx - ax), abs(by - ay)
            if dx > 1 or dy > 1 or (dx == 0 and dy == 0):
                raise DomainError(f"cells ({ax},{ay}) -> ({bx},{by}) are not 8-adjacent")
            if dx + dy == 1:
                straight += 1
            else:
                diagonal += 1
        length = (straight + SQRT2 * diagonal) * resolution
        return cls(cells=tuple((int(x), int(y)) for x, y in cells), length=length)


@dataclass(frozen=True)
class Frontier:
    """An 8-connected cluster of observed-free cells touching unknown space."""

    cells: tuple[tuple[int, int], ...]
    centroid: tuple[float, float]
    closest_cell: tuple[int, int]


def free_mask(belief: BeliefMap) -> np.ndarray:
    return belief.cells == BeliefState.FREE


def inflate_occupied(occupied: np.ndarray, radius_cells: int) -> np.ndarray:
    """Dilate an occupancy mask by a disk of the given cell radius."""
    if radius_cells <= 0:
        return occupied.copy()
    span = np.arange(-radius_cells, radius_cells + 1)
    dy, dx = np.meshgrid(span, span, indexing="ij")
    disk = (dx * dx + dy * dy) <= radius_cells * radius_cells + 1e-9
    return ndimage.binary_dilation(occupied, structure=disk)


def traversable_mask(belief: BeliefMap, robot_radius: float) -> np.ndarray:
    """Free cells that keep the robot body clear of observed obstacles."""
    radius_cells = int(math.ceil(robot_radius / belief.resolution - 1e-9))
    occupied = belief.cells == BeliefState.OCCUPIED
    return free_mask(belief) & ~inflate_occupied(occupied, radius_cells)


def clear_robot_disk(
    trav: np.ndarray, belief: BeliefMap, cell: tuple[int, int], robot_radius: float
) -> np.ndarray:
    """Whitelist the free cells under the robot's own footprint.

    A lidar update can reveal an obstacle right next to the robot, at which
    point inflation would swallow the cell it is standing on and strand it.
    The robot's body is proof those free cells are passable.
    """
    radius_cells = int(math.ceil(robot_radius / belief.resolution - 1e-9))
    cx, cy = cell
    for dy in range(-radius_cells, radius_cells + 1):
        for dx in range(-radius_cells, radius_cells + 1):
            if dx * dx + dy * dy > radius_cells * radius_cells + 1e-9:
                continue
            x, y = cx + dx, cy + dy
            if belief.in_bounds(x, y) and belief.cells[y, x] == BeliefState.FREE:
                trav[y, x] = True
    trav[cy, cx] = True
    return trav


def plan_path(
    belief: BeliefMap,
    start: tuple[int, int],
    goal: tuple[int, int],
    traversable: np.ndarray | None = None,
) -> Path:
    """Shortest 8-connected path by A* with an octile heuristic.

    Ties in the open list break on the flat cell index, so equal-cost maps
    always produce the same path.  Unknown cells are never traversable;
    callers may pass an inflated ``traversable`` mask instead of the default
    raw free mask.
    """
    if traversable is None:
        traversable = free_mask(belief)
    width, height = belief.width, belief.height
    sx, sy = int(start[0]), int(start[1])
    gx, gy = int(goal[0]), int(goal[1])
    if not (0 <= sx < width and 0 <= sy < height) or not traversable[sy, sx]:
        raise DomainError(f"start cell {start} is not traversable")
    if not (0 <= gx < width and 0 <= gy < height) or not traversable[gy, gx]:
        raise NoPathError(f"goal cell {goal} is not traversable")
    if (sx, sy) == (gx, gy):
        return Path.from_cells([(sx, sy)], belief.resolution)

    trav = traversable.ravel().tolist()
    start_idx = sy * width + sx
    goal_idx = gy * width + gx
    g_cost = {start_idx: 0.0}
    parent: dict[int, int] = {}
    closed: set[int] = set()

    def heuristic(idx: int) -> float:
        x, y = idx % width, idx // width
        dx, dy = abs(x - gx), abs(y - gy)
        return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)

    open_heap: list[tuple[float, int]] = [(heuristic(start_idx), start_idx)]
    while open_heap:
        _, idx = heapq.heappop(open_heap)
        if idx in closed:
            continue
        if idx == goal_idx:
            cells = []
            while True:
                cells.append((idx % width, idx // width))
                if idx == start_idx:
                    break
                idx = parent[idx]
            cells.reverse()
            return Path.from_cells(cells, belief.resolution)
        closed.add(idx)
        x, y = idx % width, idx // width
        base = g_cost[idx]
        for dx, dy, step in _NEIGHBORS:
            nx, ny = x + dx, y + dy
            if not (0 <= nx < width and 0 <= ny < height):
                continue
            nidx = ny * width + nx
            if nidx in closed or not trav[nidx]:
                continue
            tentative = base + step
            if tentative < g_cost.get(nidx, math.inf):
                g_cost[nidx] = tentative
                parent[nidx] = idx
                heapq.heappush(open_heap, (tentative + heuristic(nidx), nidx))
    raise NoPathError(f"no path from {start} to {goal}")


def distance_field(
    traversable: np.ndarray, resolution: float, sources: Iterable[tuple[int, int]]
) -> np.ndarray:
    """Metric shortest-path distance from the nearest source to every cell.

    Unreachable and non-traversable cells hold ``inf``.  Exact octile costs,
    computed with a C Dijkstra over the 8-connected free-cell graph.
    """
    height, width = traversable.shape
    n = height * width
    trav = traversable.astype(bool)
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    data: list[np.ndarray] = []
    # One direction per undirected edge class: E, N, NE, NW.
    for dx, dy, step in ((1, 0, 1.0), (0, 1, 1.0), (1, 1, SQRT2), (-1, 1, SQRT2)):
        src = trav.copy()
        if dx > 0:
            src[:, width - dx :] = False
        elif dx < 0:
            src[:, : -dx] = False
        if dy > 0:
            src[height - dy :, :] = False
        src &= np.roll(np.roll(trav, -dy, axis=0), -dx, axis=1)
        idx = np.flatnonzero(src.ravel())
        if idx.size:
            rows.append(idx)
            cols.append(idx + dy * width + dx)
            data.append(np.full(idx.size, step))
    valid_sources = [
        (int(x), int(y))
        for x, y in sources
        if 0 <= x < width and 0 <= y < height and trav[int(y), int(x)]
    ]
    field = np.full(n, np.inf)
    if not valid_sources:
        return field.reshape(height, width)
    if rows:
        graph = coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        )
        indices = [y * width + x for x, y in valid_sources]
        field = _csgraph_dijkstra(graph, directed=False, indices=indices, min_only=True)
    else:
        for x, y in valid_sources:
            field[y * width + x] = 0.0
    for x, y in valid_sources:
        field[y * width + x] = 0.0
    return field.reshape(height, width) * resolution


def generate_viewpoints(
    belief: BeliefMap,
    landmark_position: tuple[float, float],
    detection: DetectionRecord | None,
    robot_cell: tuple[int, int],
    landmark_id: str,
    landmark_name: str,
    cooccur: float,
    sem_uncert: float,
    params: PlannerParams = PlannerParams(),
    traversable: np.ndarray | None = None,
    dist_field: np.ndarray | None = None,
) -> Viewpoint | None:
    """Best observation pose on a ring around a landmark, or None if unreachable.

    Candidates sit at ``view_radius`` from the landmark center at evenly
    spaced angles, facing the center.  A candidate survives when its cell is
    observed-free and reachable; the reachable candidate with the shortest
    path distance from the robot wins (ties go to the lower angle index).
    """
    lx, ly = landmark_position
    ix, iy = belief.world_to_cell(lx, ly)
    if not belief.in_bounds(ix, iy):
        raise DomainError(f"landmark position {landmark_position} outside map bounds")
    if traversable is None:
        traversable = traversable_mask(belief, params.robot_radius)
    if dist_field is None:
        dist_field = distance_field(traversable, belief.resolution, [robot_cell])

    best: Viewpoint | None = None
    best_dist = math.inf
    for i in range(params.view_directions):
        angle = 2.0 * math.pi * i / params.view_directions
        px = lx + params.view_radius * math.cos(angle)
        py = ly + params.view_radius * math.sin(angle)
        cx, cy = belief.world_to_cell(px, py)
        if not belief.in_bounds(cx, cy):
            continue
        if belief.cells[cy, cx] != BeliefState.FREE or not traversable[cy, cx]:
            continue
        dist = float(dist_field[cy, cx])
        if not math.isfinite(dist) or dist >= best_dist:
            continue
        theta = normalize_angle(math.atan2(ly - py, lx - px))
        best = Viewpoint(
            landmark_id=landmark_id,
            landmark_name=landmark_name,
            pose=Pose(px, py, theta),
            cooccur=cooccur,
            sem_uncert=sem_uncert,
            detection=detection,
        )
        best_dist = dist
    return best


def viewpoint_cost(current: Pose, candidate: Viewpoint, hp: HyperParams) -> float:
    """Travel distance plus weighted co-occurrence and uncertainty penalties."""
    travel = math.hypot(candidate.pose.x - current.x, candidate.pose.y - current.y)
    return (
        travel
        + hp.lambda1 * (1.0 + COST_FLOOR - candidate.cooccur)
        + hp.lambda2 * candidate.sem_uncert
    )


def passes_thresholds(vp: Viewpoint, hp: HyperParams) -> bool:
    """Skip rule: drop viewpoints with low co-occurrence or high uncertainty."""
    return vp.cooccur >= hp.t_c and vp.sem_uncert <= hp.t_u


def plan_waypoints(
    current: Pose, candidates: Iterable[Viewpoint], hp: HyperParams
) -> list[Viewpoint]:
    """Greedy visit order: repeatedly take the cheapest remaining viewpoint.

    Threshold-violating candidates are discarded first; cost ties break on
    landmark id.  An empty result tells the caller to go explore.
    """
    pool = sorted(
        (vp for vp in candidates if passes_thresholds(vp, hp)),
        key=lambda vp: vp.landmark_id,
    )
    ordered: list[Viewpoint] = []
    anchor = current
    while pool:
        best = min(pool, key=lambda vp: viewpoint_cost(anchor, vp, hp))
        pool.remove(best)
        ordered.append(best)
        anchor = best.pose
    return ordered


def frontier_cells_mask(belief: BeliefMap) -> np.ndarray:
    """Free cells with at least one unknown 4-neighbor."""
    free = belief.cells == BeliefState.FREE
    unknown = belief.cells == BeliefState.UNKNOWN
    near_unknown = np.zeros_like(free)
    near_unknown[1:, :] |= unknown[:-1, :]
    near_unknown[:-1, :] |= unknown[1:, :]
    near_unknown[:, 1:] |= unknown[:, :-1]
    near_unknown[:, :-1] |= unknown[:, 1:]
    return free & near_unknown


def nearest_frontier(
    belief: BeliefMap,
    pose: Pose,
    params: PlannerParams = PlannerParams(),
    traversable: np.ndarray | None = None,
    dist_field: np.ndarray | None = None,
) -> Frontier | None:
    """Closest sufficiently large frontier cluster, or None when explored out.

    Clusters are 8-connected, clusters smaller than ``min_frontier_cells``
    are noise, and distance is the shortest-path distance from the pose to
    the cluster's nearest reachable member.
    """
    mask = frontier_cells_mask(belief)
    if not mask.any():
        return None
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    if count == 0:
        return None
    if traversable is None:
        traversable = traversable_mask(belief, params.robot_radius)
    if dist_field is None:
        robot_cell = belief.world_to_cell(pose.x, pose.y)
        dist_field = distance_field(traversable, belief.resolution, [robot_cell])

    best_label = None
    best_dist = math.inf
    best_cell: tuple[int, int] | None = None
    for label in range(1, count + 1):
        ys, xs = np.nonzero(labels == label)
        if xs.size < params.min_frontier_cells:
            continue
        dists = dist_field[ys, xs]
        finite = np.isfinite(dists)
        if not finite.any():
            continue
        order = np.argmin(np.where(finite, dists, np.inf))
        cluster_dist = float(dists[order])
        if cluster_dist < best_dist:
            best_dist = cluster_dist
            best_label = label
            best_cell = (int(xs[order]), int(ys[order]))
    if best_label is None:
        return None
    ys, xs = np.nonzero(labels == best_label)
    cells = tuple(sorted((int(x), int(y)) for x, y in zip(xs, ys)))
    cx = float(np.mean([belief.cell_to_world(x, y)[0] for x, y in cells]))
    cy = float(np.mean([belief.cell_to_world(x, y)[1] for x, y in cells]))
    assert best_cell is not None
    return Frontier(cells=cells, centroid=(cx, cy), closest_cell=best_cell)
