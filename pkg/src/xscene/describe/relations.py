"""Spatial-relation extraction from layouts and the graph/triple bridge."""

from __future__ import annotations

import math

import numpy as np

from ..scene.boxes import Box7, LanePolyline
from ..scene.graphs import (
    RELATION_VOCABULARY,
    GraphEdge,
    GraphNode,
    SceneGraph,
)
from .types import DescriptionSchemaError, SceneDescription

# Directional relations use a 45-degree half-angle cone around each axis of
# the reference object; "near" kicks in inside this radius.
NEAR_RADIUS_M = 15.0
CONE_HALF_ANGLE = math.pi / 4.0
ON_XY_MARGIN_M = 2.0


def _direction_relation(delta_xy: np.ndarray) -> str | None:
    """Relation of subject relative to reference (+x forward, +y left)."""
    dist = float(np.linalg.norm(delta_xy))
    if dist < 1e-9:
        return None
    angle = math.atan2(delta_xy[1], delta_xy[0])
    for center, relation in (
        (0.0, "front_of"),
        (math.pi / 2.0, "left_of"),
        (math.pi, "behind"),
        (-math.pi, "behind"),
        (-math.pi / 2.0, "right_of"),
    ):
        if abs(angle - center) <= CONE_HALF_ANGLE:
            return relation
    return "near"


def extract_relations(
    named_boxes: list[tuple[str, Box7]],
    lanes: list[tuple[str, LanePolyline]] | None = None,
    near_radius: float = NEAR_RADIUS_M,
) -> list[tuple[str, str, str]]:
    """Thresholded relation triples from world coordinates.

    Every box gets one relation to ego (at the origin); box pairs within
    ``near_radius`` get one directional relation each way being implied by
    the reverse, so only the (i < j) ordering is emitted. Boxes sitting on a
    lane corridor get an ``on`` triple.
    """
    triples: list[tuple[str, str, str]] = []
    for name, box in named_boxes:
        delta = np.asarray(box.center[:2], dtype=np.float64)
        relation = _direction_relation(delta)
        if relation is not None:
            triples.append((name, relation, "ego"))
    for i, (name_a, box_a) in enumerate(named_boxes):
        for name_b, box_b in named_boxes[i + 1 :]:
            delta = np.asarray(box_a.center[:2]) - np.asarray(box_b.center[:2])
            if float(np.linalg.norm(delta)) > near_radius:
                continue
            relation = _direction_relation(delta)
            if relation is not None:
                triples.append((name_a, relation, name_b))
    for lane_name, lane in lanes or []:
        for name, box in named_boxes:
            if _point_near_polyline(np.asarray(box.center[:2]), lane.points, ON_XY_MARGIN_M):
                triples.append((name, "on", lane_name))
    return triples


def _point_near_polyline(point: np.ndarray, polyline: np.ndarray, margin: float) -> bool:
    best = math.inf
    for a, b in zip(polyline[:-1], polyline[1:]):
        ab = b - a
        denom = float(ab @ ab)
        t = 0.0 if denom == 0 else float(np.clip((point - a) @ ab / denom, 0.0, 1.0))
        best = min(best, float(np.linalg.norm(a + t * ab - point)))
    return best <= margin


def parse_textual_layout(
    triples, description: SceneDescription
) -> SceneGraph:
    """Scene graph from validated triples: one node per entity, one edge per triple.

    Duplicate triples collapse to a single edge; node order follows the
    description's entity order with ego appended last when referenced.
    """
    categories = {name: ref.category for name, ref in description.entities()}
    attributes = {name: ref.attributes for name, ref in description.entities()}
    referenced: list[str] = []
    seen_edges: set[tuple[str, str, str]] = set()
    edges: list[GraphEdge] = []
    for subject, relation, obj in triples:
        if relation not in RELATION_VOCABULARY:
            raise DescriptionSchemaError(f"unknown relation {relation!r}")
        for endpoint in (subject, obj):
            if endpoint != "ego" and endpoint not in categories:
                raise DescriptionSchemaError(f"unknown entity {endpoint!r} in layout")
            if endpoint not in referenced:
                referenced.append(endpoint)
        key = (subject, relation, obj)
        if key in seen_edges:
            continue
        seen_edges.add(key)
        edges.append(GraphEdge(src=subject, relation=relation, dst=obj))
    nodes = tuple(
        GraphNode(
            id=name,
            category="ego" if name == "ego" else categories[name],
            attributes="" if name == "ego" else attributes[name],
        )
        for name in referenced
    )
    return SceneGraph(nodes=nodes, edges=tuple(edges))
