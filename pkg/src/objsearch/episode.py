"""Episode execution: scan, plan, visit, confirm, explore, repeat.

One episode owns its belief map and rng stream exclusively.  Every camera
call uses a stream keyed by (scenario seed, call counter), so a scenario and
seed replay to a bit-identical trace.  The trace is a list of plain dicts
with a stable schema; ``plan`` events carry the full candidate set so the
greedy ordering can be replayed from the trace alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .assets import AssetContext
from .errors import DomainError, NoPathError
from .knowledge import cooccurrence
from .matching import (
    UNKNOWN_LABEL,
    TextEmbeddingStore,
    best_landmark_match,
    landmark_probability,
    matching_score,
    semantic_uncertainty,
)
from .metrics import iou_ioa
from .planning import (
    Path,
    Viewpoint,
    clear_robot_disk,
    distance_field,
    generate_viewpoints,
    nearest_frontier,
    passes_thresholds,
    plan_path,
    plan_waypoints,
    traversable_mask,
)
from .sensing import (
    BeliefMap,
    CameraObservation,
    DetectionRecord,
    bbox_from_geometry,
    camera_observe,
    line_of_sight,
    lidar_update,
    observation_rng,
    project_detection,
    relative_bearing,
)
from .world import Pose, ScenarioSpec

IOU_CONFIRM = 0.3
IOA_CONFIRM = 0.5
MERGE_RADIUS_CELLS = 2.0  # sightings within 2 x resolution merge
_MAX_CYCLES = 10_000


class Phase(str, Enum):
    SCANNING = "scanning"
    VISITING = "visiting"
    EXPLORING = "exploring"
    DONE = "done"


@dataclass
class CandidatePatch:
    """A detection that matched the target phrase above the threshold."""

    detection: DetectionRecord
    score: float
    position: tuple[float, float]
    obs_pose: Pose


@dataclass
class LandmarkEntry:
    """Merged registry record of one sighted landmark."""

    id: str
    name: str
    position: tuple[float, float]
    cooccur: float
    sem_uncert: float
    detection: DetectionRecord
    visited: bool = False
    skipped: bool = False  # permanently excluded by the threshold rule


@dataclass
class EpisodeState:
    pose: Pose
    belief: BeliefMap
    seed: int
    phase: Phase = Phase.SCANNING
    registry: list[LandmarkEntry] = field(default_factory=list)
    viewpoints: list[Viewpoint] = field(default_factory=list)
    visited: set[str] = field(default_factory=set)
    candidates: list[CandidatePatch] = field(default_factory=list)
    traveled: float = 0.0
    waypoints_visited: int = 0
    obs_counter: int = 0
    confirm_cursor: int = 0  # candidates before this index are already judged
    trace: list[dict] = field(default_factory=list)
    fallback_flagged: bool = False


@dataclass
class EpisodeResult:
    success: bool
    traveled: float
    shortest: float
    waypoints_visited: int
    trace: list[dict]


ConfirmFn = Callable[[CandidatePatch, ScenarioSpec], bool]


def _clean(value):
    """Coerce payload values to plain JSON-stable Python types."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, Pose):
        return [float(value.x), float(value.y), float(value.theta)]
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    return value


def _emit(state: EpisodeState, event: str, **payload) -> None:
    record = {"i": len(state.trace), "event": event}
    record.update({k: _clean(v) for k, v in payload.items()})
    state.trace.append(record)


def trace_to_jsonl(trace: Sequence[dict]) -> str:
    return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in trace)


# --------------------------------------------------------------------------
# Observation processing
# --------------------------------------------------------------------------


def _next_rng(state: EpisodeState):
    rng = observation_rng(state.seed, state.obs_counter)
    state.obs_counter += 1
    return rng


def _target_cooccur(
    state: EpisodeState, scenario: ScenarioSpec, ctx: AssetContext, name: str, cache: dict
) -> float:
    if name not in cache:
        cache[name] = cooccurrence(
            scenario.target_phrase, name, ctx.generations, ctx.words, ctx.p_fallback
        )
        if scenario.target_phrase not in ctx.generations and not state.fallback_flagged:
            state.fallback_flagged = True
            _emit(state, "fallback_cooccurrence", target=scenario.target_phrase)
    return cache[name]


def _register_sighting(
    state: EpisodeState,
    scenario: ScenarioSpec,
    name: str,
    position: tuple[float, float],
    sem_uncert: float,
    det: DetectionRecord,
    cooccur_value: float,
) -> None:
    merge_radius = MERGE_RADIUS_CELLS * scenario.map.resolution
    for entry in state.registry:
        if math.dist(entry.position, position) <= merge_radius:
            if sem_uncert < entry.sem_uncert:
                entry.name = name
                entry.position = position
                entry.cooccur = cooccur_value
                entry.sem_uncert = sem_uncert
                entry.detection = det
                _emit(
                    state,
                    "landmark_update",
                    id=entry.id,
                    name=name,
                    pos=list(position),
                    cooccur=cooccur_value,
                    sem_uncert=sem_uncert,
                )
            return
    entry = LandmarkEntry(
        id=f"lm{len(state.registry):03d}",
        name=name,
        position=position,
        cooccur=cooccur_value,
        sem_uncert=sem_uncert,
        detection=det,
    )
    state.registry.append(entry)
    _emit(
        state,
        "landmark_new",
        id=entry.id,
        name=name,
        pos=list(position),
        cooccur=cooccur_value,
        sem_uncert=sem_uncert,
    )


def _process_observation(
    state: EpisodeState,
    scenario: ScenarioSpec,
    ctx: AssetContext,
    store: TextEmbeddingStore,
    obs: CameraObservation,
    register_landmarks: bool,
    match_all_labels: bool,
    cooccur_cache: dict,
) -> None:
    hp = scenario.hyperparams
    unknown_names = scenario.unknown_landmark_names
    target_vec = store.get(scenario.target_phrase)
    for det in obs.detections:
        position = project_detection(det, obs.pose)
        if register_landmarks:
            if det.label != UNKNOWN_LABEL:
                value = _target_cooccur(state, scenario, ctx, det.label, cooccur_cache)
                _register_sighting(state, scenario, det.label, position, 0.0, det, value)
            elif unknown_names:
                name, score = best_landmark_match(det.patch_embedding, unknown_names, store)
                if score > hp.m_t:
                    prob = landmark_probability(
                        det.patch_embedding, unknown_names, store, hp.temperature
                    )
                    value = _target_cooccur(state, scenario, ctx, name, cooccur_cache)
                    _register_sighting(
                        state, scenario, name, position, semantic_uncertainty(prob), det, value
                    )
        if match_all_labels or det.label == UNKNOWN_LABEL:
            score = matching_score(target_vec, det.patch_embedding)
            if score > hp.m_t:
                state.candidates.append(
                    CandidatePatch(detection=det, score=score, position=position, obs_pose=obs.pose)
                )
                _emit(state, "candidate", score=score, pos=list(position), obs_pose=obs.pose)


def initial_scan(
    state: EpisodeState,
    scenario: ScenarioSpec,
    ctx: AssetContext,
    store: TextEmbeddingStore,
    cooccur_cache: dict,
) -> None:
    """One lidar sweep plus a full camera rotation; registers landmarks and
    matches the target on every detection."""
    hp = scenario.hyperparams
    lidar_update(
        state.belief, scenario.map, state.pose, scenario.sensor.lidar_rays,
        scenario.sensor.lidar_range,
    )
    detections = 0
    for h in range(hp.scan_headings):
        heading = 2.0 * math.pi * h / hp.scan_headings
        obs = camera_observe(
            scenario, store, Pose(state.pose.x, state.pose.y, heading), _next_rng(state)
        )
        detections += len(obs.detections)
        _process_observation(
            state, scenario, ctx, store, obs,
            register_landmarks=True, match_all_labels=True, cooccur_cache=cooccur_cache,
        )
    _emit(state, "scan", pose=state.pose, headings=hp.scan_headings, detections=detections)


# --------------------------------------------------------------------------
# Confirmation oracle
# --------------------------------------------------------------------------


def _confirm_candidate(cand: CandidatePatch, scenario: ScenarioSpec) -> bool:
    """Regenerate the target's ground-truth box from the candidate's pose and
    apply the IoU / IoA success rule."""
    target = scenario.target
    hp = scenario.hyperparams
    pose = cand.obs_pose
    distance = math.hypot(target.position[0] - pose.x, target.position[1] - pose.y)
    if distance <= 0.0 or distance > hp.cam_range:
        return False
    rel = relative_bearing(pose, target.position)
    if abs(rel) > hp.fov / 2.0:
        return False
    slack = target.radius + 2.0 * scenario.map.resolution
    if not line_of_sight(scenario.map, (pose.x, pose.y), target.position, slack):
        return False
    gt_box = bbox_from_geometry(rel, distance, target.radius, hp.fov)
    iou, ioa = iou_ioa(cand.detection.bbox, gt_box)
    return iou > IOU_CONFIRM or ioa > IOA_CONFIRM


def oracle_confirm(candidates: Sequence[CandidatePatch], scenario: ScenarioSpec) -> list[bool]:
    """Automated stand-in for asking a human about each candidate patch."""
    if not candidates:
        raise DomainError("oracle_confirm needs at least one candidate")
    return [_confirm_candidate(c, scenario) for c in candidates]


def _judge_new_candidates(
    state: EpisodeState, scenario: ScenarioSpec, confirm_fn: ConfirmFn
) -> CandidatePatch | None:
    """Run confirmation on candidates not yet judged; return the first hit."""
    fresh = state.candidates[state.confirm_cursor :]
    if not fresh:
        return None
    results = [bool(confirm_fn(c, scenario)) for c in fresh]
    state.confirm_cursor = len(state.candidates)
    _emit(state, "confirm", results=results, success=any(results))
    for cand, ok in zip(fresh, results):
        if ok:
            return cand
    return None


# --------------------------------------------------------------------------
# Navigation
# --------------------------------------------------------------------------


def _current_cell(state: EpisodeState) -> tuple[int, int]:
    return state.belief.world_to_cell(state.pose.x, state.pose.y)


def _traversable_now(state: EpisodeState, scenario: ScenarioSpec) -> np.ndarray:
    trav = traversable_mask(state.belief, scenario.planner.robot_radius)
    return clear_robot_disk(trav, state.belief, _current_cell(state),
                            scenario.planner.robot_radius)


def _walk(
    state: EpisodeState, scenario: ScenarioSpec, path: Path
) -> tuple[float, bool]:
    """Follow a planned path, refreshing lidar periodically.

    Returns (walked length, arrived).  Walking aborts early when a lidar
    refresh reveals the remainder of the path is no longer traversable.
    """
    planner = scenario.planner
    sensor = scenario.sensor
    res = state.belief.resolution
    cells = path.cells
    walked = 0.0
    for k in range(1, len(cells)):
        px, py = cells[k - 1]
        cx, cy = cells[k]
        step = (1.0 if abs(cx - px) + abs(cy - py) == 1 else math.sqrt(2.0)) * res
        wx, wy = state.belief.cell_to_world(cx, cy)
        state.pose = Pose(wx, wy, math.atan2(cy - py, cx - px))
        state.traveled += step
        walked += step
        last = k == len(cells) - 1
        if last or k % planner.step_interval == 0:
            lidar_update(state.belief, scenario.map, state.pose, sensor.lidar_rays,
                         sensor.lidar_range)
            if not last:
                trav = traversable_mask(state.belief, planner.robot_radius)
                clear_robot_disk(trav, state.belief, (cx, cy), planner.robot_radius)
                if not all(trav[y, x] for x, y in cells[k + 1 :]):
                    return walked, False
    return walked, True


class _NavOutcome(Enum):
    ARRIVED = "arrived"
    NO_PATH = "no_path"
    BUDGET = "budget"


def _navigate(state: EpisodeState, scenario: ScenarioSpec, goal: tuple[int, int]) -> _NavOutcome:
    """Drive to a goal cell, replanning when newly seen obstacles intrude."""
    hp = scenario.hyperparams
    while True:
        trav = _traversable_now(state, scenario)
        try:
            path = plan_path(state.belief, _current_cell(state), goal, trav)
        except NoPathError:
            return _NavOutcome.NO_PATH
        walked, arrived = _walk(state, scenario, path)
        _emit(state, "leg", to=list(goal), length=walked, traveled=state.traveled)
        if state.traveled > hp.fail_distance:
            _emit(state, "budget_exceeded", traveled=state.traveled)
            return _NavOutcome.BUDGET
        if arrived:
            return _NavOutcome.ARRIVED


# --------------------------------------------------------------------------
# Waypoint visits
# --------------------------------------------------------------------------


def _pan_offsets(count: int) -> list[float]:
    """0, +30deg, -30deg, +60deg, ... up to the requested view count."""
    offsets = [0.0]
    step = math.pi / 6.0
    j = 1
    while len(offsets) < count:
        offsets.append(j * step)
        if len(offsets) < count:
            offsets.append(-j * step)
        j += 1
    return offsets


def visit_waypoint(
    state: EpisodeState,
    scenario: ScenarioSpec,
    ctx: AssetContext,
    store: TextEmbeddingStore,
    vp: Viewpoint,
    cooccur_cache: dict,
) -> _NavOutcome:
    """Navigate to a viewpoint and sweep the camera for target matches."""
    _emit(state, "visit_start", id=vp.landmark_id, pose=vp.pose)
    goal = state.belief.world_to_cell(vp.pose.x, vp.pose.y)
    outcome = _navigate(state, scenario, goal)
    if outcome is _NavOutcome.NO_PATH:
        _emit(state, "abandon", id=vp.landmark_id, reason="no_path")
        return outcome
    if outcome is _NavOutcome.BUDGET:
        return outcome
    state.pose = vp.pose
    state.visited.add(vp.landmark_id)
    for entry in state.registry:
        if entry.id == vp.landmark_id:
            entry.visited = True
    state.waypoints_visited += 1
    _emit(state, "arrive", id=vp.landmark_id)
    for offset in _pan_offsets(scenario.hyperparams.pan_views):
        obs = camera_observe(
            scenario, store,
            Pose(vp.pose.x, vp.pose.y, vp.pose.theta + offset),
            _next_rng(state),
        )
        _process_observation(
            state, scenario, ctx, store, obs,
            register_landmarks=False, match_all_labels=False, cooccur_cache=cooccur_cache,
        )
    return _NavOutcome.ARRIVED


def _plan_cycle(state: EpisodeState, scenario: ScenarioSpec) -> list[Viewpoint]:
    """Generate viewpoints for pending landmarks and order them greedily."""
    planner = scenario.planner
    hp = scenario.hyperparams
    trav = _traversable_now(state, scenario)
    dist = distance_field(trav, state.belief.resolution, [_current_cell(state)])
    candidates: list[Viewpoint] = []
    for entry in state.registry:
        if entry.visited or entry.skipped:
            continue
        vp = generate_viewpoints(
            state.belief, entry.position, entry.detection, _current_cell(state),
            entry.id, entry.name, entry.cooccur, entry.sem_uncert,
            planner, trav, dist,
        )
        if vp is not None:
            candidates.append(vp)
    ordered = plan_waypoints(state.pose, candidates, hp)
    skipped = [vp.landmark_id for vp in candidates if not passes_thresholds(vp, hp)]
    for entry in state.registry:
        if entry.id in skipped:
            entry.skipped = True
    _emit(
        state,
        "plan",
        candidates=[
            {
                "id": vp.landmark_id,
                "name": vp.landmark_name,
                "pose": vp.pose,
                "cooccur": vp.cooccur,
                "sem_uncert": vp.sem_uncert,
            }
            for vp in candidates
        ],
        order=[vp.landmark_id for vp in ordered],
        skipped=skipped,
    )
    state.viewpoints = candidates
    return ordered


# --------------------------------------------------------------------------
# Ground-truth shortest path for SPL
# --------------------------------------------------------------------------


def ground_truth_shortest(scenario: ScenarioSpec) -> float:
    """Length of the shortest drivable path to any cell that can confirm the
    target on the fully known map; inf when no such cell is reachable."""
    grid = scenario.map
    target = scenario.target
    belief_like = BeliefMap(grid.width, grid.height, grid.resolution,
                            np.where(grid.cells == 0, 1, 2).astype(np.uint8))
    trav = traversable_mask(belief_like, scenario.planner.robot_radius)
    start = grid.world_to_cell(scenario.start.x, scenario.start.y)
    trav[start[1], start[0]] = True
    dist = distance_field(trav, grid.resolution, [start])
    hp = scenario.hyperparams
    slack = target.radius + 2.0 * grid.resolution
    max_range = hp.cam_range + grid.resolution  # half-cell tolerance at the rim
    ys, xs = np.nonzero(np.isfinite(dist))
    order = np.argsort(dist[ys, xs], kind="stable")
    for idx in order:
        x, y = int(xs[idx]), int(ys[idx])
        cx, cy = grid.cell_to_world(x, y)
        d = math.hypot(target.position[0] - cx, target.position[1] - cy)
        if d <= 0.0 or d > max_range:
            continue
        if line_of_sight(grid, (cx, cy), target.position, slack):
            return float(dist[y, x])
    return math.inf


# --------------------------------------------------------------------------
# Episode loop
# --------------------------------------------------------------------------


def run_episode(
    scenario: ScenarioSpec,
    ctx: AssetContext | None = None,
    seed: int | None = None,
    confirm_fn: ConfirmFn | None = None,
) -> EpisodeResult:
    """Execute the full search loop on one scenario.

    The loop alternates scanning, greedy waypoint visits with confirmation
    after every visit, and nearest-frontier exploration, until a candidate is
    confirmed, the travel budget is exhausted, or there is nothing left to
    explore.
    """
    if ctx is None:
        ctx = AssetContext.load()
    if confirm_fn is None:
        confirm_fn = _confirm_candidate
    store = ctx.text_store_for(scenario)
    episode_seed = scenario.seed if seed is None else seed

    state = EpisodeState(
        pose=scenario.start,
        belief=BeliefMap.for_grid(scenario.map),
        seed=episode_seed,
    )
    _emit(state, "episode_start", seed=episode_seed, target=scenario.target_phrase,
          start=scenario.start)
    shortest = ground_truth_shortest(scenario)
    cooccur_cache: dict[str, float] = {}

    success = False
    prev_progress: tuple | None = None
    for _ in range(_MAX_CYCLES):
        state.phase = Phase.SCANNING
        initial_scan(state, scenario, ctx, store, cooccur_cache)
        if _judge_new_candidates(state, scenario, confirm_fn) is not None:
            success = True
            break
        progress = (
            state.belief.known_count(),
            len(state.registry),
            round(state.traveled, 9),
            len(state.candidates),
            len(state.visited),
        )
        if progress == prev_progress:
            _emit(state, "explore_exhausted", reason="no_progress")
            break
        prev_progress = progress

        ordered = _plan_cycle(state, scenario)
        state.phase = Phase.VISITING
        stop = False
        for vp in ordered:
            outcome = visit_waypoint(state, scenario, ctx, store, vp, cooccur_cache)
            if outcome is _NavOutcome.BUDGET:
                stop = True
                break
            if outcome is _NavOutcome.NO_PATH:
                continue
            if _judge_new_candidates(state, scenario, confirm_fn) is not None:
                success = True
                stop = True
                break
        if stop:
            break

        state.phase = Phase.EXPLORING
        trav = _traversable_now(state, scenario)
        dist = distance_field(trav, state.belief.resolution, [_current_cell(state)])
        frontier = nearest_frontier(state.belief, state.pose, scenario.planner, trav, dist)
        if frontier is None:
            _emit(state, "explore_exhausted", reason="no_frontier")
            break
        _emit(state, "frontier", goal=list(frontier.closest_cell),
              cells=len(frontier.cells), centroid=list(frontier.centroid))
        outcome = _navigate(state, scenario, frontier.closest_cell)
        if outcome is _NavOutcome.BUDGET:
            break
        # NO_PATH or arrival both loop back to scanning; the progress guard
        # catches the case where nothing changed.

    state.phase = Phase.DONE
    _emit(
        state,
        "episode_end",
        success=success,
        traveled=state.traveled,
        shortest=None if not math.isfinite(shortest) else shortest,
        waypoints_visited=state.waypoints_visited,
    )
    return EpisodeResult(
        success=success,
        traveled=state.traveled,
        shortest=shortest,
        waypoints_visited=state.waypoints_visited,
        trace=state.trace,
    )
