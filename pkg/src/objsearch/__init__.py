"""Deterministic grid-world benchmark for landmark-guided active object search."""

from .assets import AssetContext
from .batch import AggregateReport, RunConfig, run_batch
from .episode import EpisodeResult, oracle_confirm, run_episode
from .knowledge import GenerationTable, WordVectorStore, cooccurrence, phrase_vector
from .matching import (
    PromptSet,
    TextEmbeddingStore,
    identify_unknown_landmark,
    landmark_probability,
    matching_score,
    objectness_score,
    select_pseudo_annotations,
    semantic_uncertainty,
)
from .metrics import iou_ioa, spl
from .mixture import (
    MixtureOutput,
    UncertaintyStats,
    aleatoric,
    calibrate,
    classification_loss,
    epistemic,
    relabel_unknown,
)
from .planning import (
    Frontier,
    Path,
    Viewpoint,
    generate_viewpoints,
    nearest_frontier,
    plan_path,
    plan_waypoints,
    viewpoint_cost,
)
from .sensing import BeliefMap, CameraObservation, DetectionRecord, camera_observe, lidar_update
from .suitegen import SuiteParams, generate_suite
from .world import (
    GridMap,
    HyperParams,
    LandmarkSpec,
    ObjectSpec,
    Pose,
    ScenarioSpec,
    load_scenario,
    raycast,
    serialize_scenario,
)

__version__ = "0.1.0"
