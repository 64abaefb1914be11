from .dataset import (
    EpisodeDataset,
    SceneDataset,
    TrajectoryRecord,
    generate_dataset,
    load_manifest,
    rollout_expert,
)
from .expert import is_success, scripted_expert
from .render import (
    ID_BACKGROUND,
    ID_BLOCK0,
    ID_POLE,
    ID_TABLE,
    VIEW_MAX,
    VIEW_MIN,
    effector_id,
    entity_ids,
    ground_truth_masks,
    masks_from_ids,
    mask_stack,
    palette_for,
    render,
    render_u8,
)
from .scene import (
    EFFECTOR_RADIUS,
    MAX_STEP,
    POLE_RADIUS,
    SUCCESS_RADIUS,
    ScenePlacementError,
    SceneState,
    sample_scene,
)
from .shapes import COLORS, PALETTE, SHAPES, BlockSpec, block_polygon, roster
from .sim import clamp_action, step

__all__ = [
    "BlockSpec",
    "COLORS",
    "EFFECTOR_RADIUS",
    "EpisodeDataset",
    "ID_BACKGROUND",
    "ID_BLOCK0",
    "ID_POLE",
    "ID_TABLE",
    "MAX_STEP",
    "PALETTE",
    "POLE_RADIUS",
    "SHAPES",
    "SUCCESS_RADIUS",
    "SceneDataset",
    "ScenePlacementError",
    "SceneState",
    "TrajectoryRecord",
    "VIEW_MAX",
    "VIEW_MIN",
    "block_polygon",
    "clamp_action",
    "effector_id",
    "entity_ids",
    "generate_dataset",
    "ground_truth_masks",
    "masks_from_ids",
    "is_success",
    "load_manifest",
    "mask_stack",
    "palette_for",
    "render",
    "render_u8",
    "rollout_expert",
    "roster",
    "sample_scene",
    "scripted_expert",
    "step",
]
