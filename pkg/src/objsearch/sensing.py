"""Simulated sensors: lidar occupancy updates and synthetic open-set detections.

The camera stands in for a trained open-set detector.  Every landmark or
object that is in range, inside the field of view and not occluded yields a
detection whose patch embedding is its name embedding plus seeded noise, and
whose mixture head output is synthesized from similarities to the known-class
text embeddings.  Everything is a pure function of (inputs, rng stream).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import DomainError
from .matching import UNKNOWN_LABEL, TextEmbeddingStore, unit
from .mixture import MixtureOutput
from .world import CellState, GridMap, Pose, ScenarioSpec, normalize_angle, raycast_batch

IMAGE_WIDTH = 640.0
IMAGE_HEIGHT = 480.0
MIN_BBOX_PX = 4.0
CLUTTER_SOURCE = "clutter"
_CLUTTER_RADIUS = 0.2
_CLUTTER_MIN_RANGE = 0.3


class BeliefState(IntEnum):
    UNKNOWN = 0
    FREE = 1
    OCCUPIED = 2


@dataclass(eq=False)
class BeliefMap:
    """Robot-observed occupancy; starts all Unknown and only ever gains knowledge."""

    width: int
    height: int
    resolution: float
    cells: np.ndarray

    @classmethod
    def for_grid(cls, grid: GridMap) -> "BeliefMap":
        return cls(
            width=grid.width,
            height=grid.height,
            resolution=grid.resolution,
            cells=np.zeros((grid.height, grid.width), dtype=np.uint8),
        )

    def copy(self) -> "BeliefMap":
        return BeliefMap(self.width, self.height, self.resolution, self.cells.copy())

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        return int(math.floor(x / self.resolution)), int(math.floor(y / self.resolution))

    def cell_to_world(self, ix: int, iy: int) -> tuple[float, float]:
        return (ix + 0.5) * self.resolution, (iy + 0.5) * self.resolution

    def known_count(self) -> int:
        return int((self.cells != BeliefState.UNKNOWN).sum())

    def free_count(self) -> int:
        return int((self.cells == BeliefState.FREE).sum())


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixels on the virtual image plane."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.x_min < self.x_max <= IMAGE_WIDTH):
            raise DomainError(f"bbox x range [{self.x_min}, {self.x_max}] invalid")
        if not (0.0 <= self.y_min < self.y_max <= IMAGE_HEIGHT):
            raise DomainError(f"bbox y range [{self.y_min}, {self.y_max}] invalid")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class DetectionRecord:
    """One synthesized detection.  ``source_object`` is ground truth for the
    harness only; planner-facing code must not branch on it."""

    source_object: str
    label: str
    bbox: BBox
    patch_embedding: np.ndarray
    mixture: MixtureOutput
    range: float
    bearing: float


@dataclass(frozen=True)
class CameraObservation:
    pose: Pose
    detections: tuple[DetectionRecord, ...] = field(default_factory=tuple)


def lidar_update(
    belief: BeliefMap,
    world: GridMap,
    pose: Pose,
    rays: int = 360,
    max_range: float = 3.5,
) -> BeliefMap:
    """Sweep ``rays`` evenly spaced bearings, growing the belief map in place.

    Cells crossed before a hit become Free, hit cells become Occupied; known
    cells never revert to Unknown.
    """
    ix, iy = world.world_to_cell(pose.x, pose.y)
    if not world.in_bounds(ix, iy):
        raise DomainError(f"lidar pose ({pose.x}, {pose.y}) outside map bounds")
    if world.cells[iy, ix] != CellState.FREE:
        raise DomainError("lidar pose is inside an obstacle")
    bearings = np.arange(rays, dtype=np.float64) * (2.0 * math.pi / rays)
    free_mask = np.zeros_like(belief.cells, dtype=bool)
    hit_mask = np.zeros_like(belief.cells, dtype=bool)
    raycast_batch(world, (pose.x, pose.y), bearings, max_range, free_mask, hit_mask)
    belief.cells[free_mask] = BeliefState.FREE
    belief.cells[hit_mask] = BeliefState.OCCUPIED
    return belief


def relative_bearing(pose: Pose, point: tuple[float, float]) -> float:
    """Bearing of a world point relative to the pose heading, in [-pi, pi)."""
    return normalize_angle(math.atan2(point[1] - pose.y, point[0] - pose.x) - pose.theta)


def bbox_from_geometry(rel_bearing: float, distance: float, radius: float, fov: float) -> BBox:
    """Project an entity to a square image box with the angular-size model."""
    u_center = (0.5 - rel_bearing / fov) * IMAGE_WIDTH
    angular = 2.0 * math.atan2(radius, distance)
    width = min(max(angular / fov * IMAGE_WIDTH, MIN_BBOX_PX), IMAGE_WIDTH)
    height = min(width, IMAGE_HEIGHT)
    x_min = max(0.0, u_center - width / 2.0)
    x_max = min(IMAGE_WIDTH, u_center + width / 2.0)
    y_min = max(0.0, IMAGE_HEIGHT / 2.0 - height / 2.0)
    y_max = min(IMAGE_HEIGHT, IMAGE_HEIGHT / 2.0 + height / 2.0)
    return BBox(x_min, y_min, x_max, y_max)


def line_of_sight(
    world: GridMap,
    origin: tuple[float, float],
    point: tuple[float, float],
    slack: float,
) -> bool:
    """True when a ray to the point is not interrupted by foreign geometry.

    ``slack`` absorbs the entity's own extent: a hit within ``slack`` of the
    point (its own footprint face) still counts as visible.
    """
    dx, dy = point[0] - origin[0], point[1] - origin[1]
    distance = math.hypot(dx, dy)
    if distance <= 0.0:
        return True
    bearing = math.atan2(dy, dx)
    dist, blocked = raycast_batch(world, origin, np.array([bearing]), distance)
    return (not bool(blocked[0])) or float(dist[0]) >= distance - slack


def _synthesize_mixture(
    emb: np.ndarray,
    known_classes: list[str],
    store: TextEmbeddingStore,
    mixtures: int,
    sigma_mix: float,
    rng: np.random.Generator,
) -> MixtureOutput:
    """Mixture head output from known-class similarities plus seeded noise."""
    base = [100.0 * float(np.dot(emb, store.get(c))) for c in known_classes]
    base.extend([0.0, 0.0])  # background and unknown offsets
    logits = np.tile(np.asarray(base, dtype=np.float64), (mixtures, 1))
    if sigma_mix > 0.0:
        logits = logits + sigma_mix * rng.standard_normal(logits.shape)
        weight_scores = sigma_mix * rng.standard_normal(mixtures)
    else:
        weight_scores = np.zeros(mixtures)
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    mu = shifted / shifted.sum(axis=1, keepdims=True)
    wshift = np.exp(weight_scores - weight_scores.max())
    pi = wshift / wshift.sum()
    return MixtureOutput(pi=pi, mu=mu)


def camera_observe(
    scenario: ScenarioSpec,
    store: TextEmbeddingStore,
    pose: Pose,
    rng: np.random.Generator,
) -> CameraObservation:
    """Synthesize detections for every visible entity in the field of view.

    Deterministic for a fixed rng state: entities are processed in scenario
    order (landmarks, then objects, then clutter) and draws happen in a fixed
    order per detection.
    """
    grid = scenario.map
    ix, iy = grid.world_to_cell(pose.x, pose.y)
    if not grid.is_free(ix, iy):
        raise DomainError("camera pose is not in free space")
    hp = scenario.hyperparams
    sp = scenario.sensor
    half_fov = hp.fov / 2.0
    known_classes = scenario.known_classes
    origin = (pose.x, pose.y)
    res = grid.resolution

    detections: list[DetectionRecord] = []
    entities = [
        (lm.id, lm.name, lm.center, lm.radius, lm.known, lm.radius + res)
        for lm in scenario.landmarks
    ] + [
        (ob.id, ob.name, ob.position, ob.radius, False, ob.radius + 2.0 * res)
        for ob in scenario.objects
    ]
    for entity_id, name, center, radius, known, slack in entities:
        distance = math.hypot(center[0] - pose.x, center[1] - pose.y)
        if distance <= 0.0 or distance > hp.cam_range:
            continue
        rel = relative_bearing(pose, center)
        if abs(rel) > half_fov:
            continue
        if not line_of_sight(grid, origin, center, slack):
            continue
        if sp.p_miss > 0.0 and rng.random() < sp.p_miss:
            continue
        canonical = store.get(name)
        if sp.sigma_emb > 0.0:
            emb = unit(canonical + sp.sigma_emb * rng.standard_normal(canonical.shape[0]))
        else:
            emb = canonical
        mix = _synthesize_mixture(emb, known_classes, store, sp.mixtures, sp.sigma_mix, rng)
        detections.append(
            DetectionRecord(
                source_object=entity_id,
                label=name if known else UNKNOWN_LABEL,
                bbox=bbox_from_geometry(rel, distance, radius, hp.fov),
                patch_embedding=emb,
                mixture=mix,
                range=distance,
                bearing=rel,
            )
        )

    for _ in range(sp.clutter):
        rel = rng.uniform(-half_fov, half_fov)
        ray_dist, _ = raycast_batch(
            grid, origin, np.array([pose.theta + rel]), hp.cam_range
        )
        limit = float(ray_dist[0]) - res
        if limit <= _CLUTTER_MIN_RANGE:
            continue
        distance = rng.uniform(_CLUTTER_MIN_RANGE, limit)
        emb = unit(rng.standard_normal(store.get(scenario.target_phrase).shape[0]))
        mix = _synthesize_mixture(emb, known_classes, store, sp.mixtures, sp.sigma_mix, rng)
        detections.append(
            DetectionRecord(
                source_object=CLUTTER_SOURCE,
                label=UNKNOWN_LABEL,
                bbox=bbox_from_geometry(rel, distance, _CLUTTER_RADIUS, hp.fov),
                patch_embedding=emb,
                mixture=mix,
                range=distance,
                bearing=rel,
            )
        )
    return CameraObservation(pose=pose, detections=tuple(detections))


def observation_rng(seed: int, counter: int) -> np.random.Generator:
    """Stream for one camera call; (seed, counter) keyed so traces replay."""
    return np.random.default_rng(np.random.SeedSequence([seed, counter]))


def project_detection(det: DetectionRecord, pose: Pose) -> tuple[float, float]:
    """World position of a detection from its range and bearing."""
    heading = pose.theta + det.bearing
    return pose.x + det.range * math.cos(heading), pose.y + det.range * math.sin(heading)
