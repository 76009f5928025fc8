"""Canonical domain types, coordinate conventions, and serialization."""

from .boxes import (
    LANE_POINT_COUNT,
    Box7,
    BoxDomainError,
    LanePolyline,
    denormalize_box,
    normalize_box,
    wrap_angle,
)
from .cameras import (
    Camera,
    PerspectiveMap,
    camera_looking,
    project_layout_to_perspective,
)
from .graphs import (
    RELATION_VOCABULARY,
    GraphEdge,
    GraphNode,
    SceneGraph,
    ValidationReport,
    validate_scene_graph,
)
from .world import (
    DESK_CLASS_NAMES,
    DESK_PALETTE,
    LabelMappingError,
    OccupancyGrid,
    WorldSpec,
    desk_world,
    full_scale_world,
    map_labels,
    merge_17_to_11,
)

__all__ = [
    "LANE_POINT_COUNT",
    "Box7",
    "BoxDomainError",
    "LanePolyline",
    "denormalize_box",
    "normalize_box",
    "wrap_angle",
    "Camera",
    "PerspectiveMap",
    "camera_looking",
    "project_layout_to_perspective",
    "RELATION_VOCABULARY",
    "GraphEdge",
    "GraphNode",
    "SceneGraph",
    "ValidationReport",
    "validate_scene_graph",
    "DESK_CLASS_NAMES",
    "DESK_PALETTE",
    "LabelMappingError",
    "OccupancyGrid",
    "WorldSpec",
    "desk_world",
    "full_scale_world",
    "map_labels",
    "merge_17_to_11",
]
