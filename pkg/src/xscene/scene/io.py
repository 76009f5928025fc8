"""On-disk formats: the .occ binary volume, JSON documents, triplane files.

.occ layout (little-endian): magic ``XOCC``, version u16, dims X/Y/Z u32,
class_count u16, then X*Y*Z label bytes with x major, y next, z fastest.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .boxes import Box7, LanePolyline
from .graphs import GraphEdge, GraphNode, SceneGraph
from .world import OccupancyGrid, WorldSpec

OCC_MAGIC = b"XOCC"
OCC_VERSION = 1


class FormatError(ValueError):
    """Raised on malformed files or documents."""


def dump_json(obj: dict, path: Path | str) -> None:
    Path(path).write_text(canonical_json(obj), encoding="utf-8")


def canonical_json(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def load_json(path: Path | str) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_occ(grid: OccupancyGrid, path: Path | str) -> None:
    x, y, z = grid.world.grid_dims
    header = OCC_MAGIC + struct.pack(
        "<HIIIH", OCC_VERSION, x, y, z, grid.world.class_count
    )
    Path(path).write_bytes(header + np.ascontiguousarray(grid.labels).tobytes())


def read_occ(path: Path | str, world: WorldSpec | None = None) -> OccupancyGrid:
    raw = Path(path).read_bytes()
    if raw[:4] != OCC_MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}")
    version, x, y, z, class_count = struct.unpack("<HIIIH", raw[4:20])
    if version != OCC_VERSION:
        raise FormatError(f"unsupported version {version}")
    expected = 20 + x * y * z
    if len(raw) != expected:
        raise FormatError(f"file size {len(raw)} != expected {expected}")
    labels = np.frombuffer(raw[20:], dtype=np.uint8).reshape(x, y, z)
    if world is None:
        world = WorldSpec(
            bounds_min=(0.0, 0.0, 0.0),
            bounds_max=(float(x), float(y), float(z)),
            grid_dims=(x, y, z),
            voxel_size=1.0,
            class_count=class_count,
        )
    elif world.grid_dims != (x, y, z) or world.class_count != class_count:
        raise FormatError("sidecar world does not match .occ header")
    return OccupancyGrid(world, labels.copy())


def world_to_doc(world: WorldSpec) -> dict:
    return {
        "schema": "worldspec/1",
        "bounds_min": list(world.bounds_min),
        "bounds_max": list(world.bounds_max),
        "grid_dims": list(world.grid_dims),
        "voxel_size": world.voxel_size,
        "class_count": world.class_count,
        "class_names": list(world.class_names),
        "palette": {str(k): list(v) for k, v in world.palette.items()},
    }


def world_from_doc(doc: dict) -> WorldSpec:
    if doc.get("schema") != "worldspec/1":
        raise FormatError(f"unexpected schema {doc.get('schema')!r}")
    return WorldSpec(
        bounds_min=tuple(doc["bounds_min"]),
        bounds_max=tuple(doc["bounds_max"]),
        grid_dims=tuple(doc["grid_dims"]),
        voxel_size=doc["voxel_size"],
        class_count=doc["class_count"],
        class_names=tuple(doc.get("class_names", ())),
        palette={int(k): tuple(v) for k, v in doc.get("palette", {}).items()},
    )


def save_occupancy(grid: OccupancyGrid, path: Path | str) -> None:
    """Write volume.occ plus a worldspec JSON sidecar next to it."""
    path = Path(path)
    write_occ(grid, path)
    dump_json(world_to_doc(grid.world), path.with_suffix(".json"))


def load_occupancy(path: Path | str) -> OccupancyGrid:
    path = Path(path)
    sidecar = path.with_suffix(".json")
    world = world_from_doc(load_json(sidecar)) if sidecar.exists() else None
    return read_occ(path, world)


def layout_to_doc(boxes: list[Box7], lanes: list[LanePolyline]) -> dict:
    return {
        "schema": "layout/1",
        "boxes": [
            {
                "center": list(b.center),
                "dims": list(b.dims),
                "yaw": b.yaw,
                "class_id": b.class_id,
                "instance_id": b.instance_id,
            }
            for b in boxes
        ],
        "lanes": [
            {"points": lane.points.tolist(), "lane_type": lane.lane_type}
            for lane in lanes
        ],
    }


def layout_from_doc(doc: dict) -> tuple[list[Box7], list[LanePolyline]]:
    if doc.get("schema") != "layout/1":
        raise FormatError(f"unexpected schema {doc.get('schema')!r}")
    boxes = [
        Box7(
            center=tuple(b["center"]),
            dims=tuple(b["dims"]),
            yaw=b["yaw"],
            class_id=b["class_id"],
            instance_id=b.get("instance_id", 0),
        )
        for b in doc["boxes"]
    ]
    lanes = [
        LanePolyline(points=np.asarray(l["points"]), lane_type=l.get("lane_type", "lane"))
        for l in doc["lanes"]
    ]
    return boxes, lanes


def graph_to_doc(graph: SceneGraph) -> dict:
    return {
        "schema": "scene_graph/1",
        "nodes": [
            {"id": n.id, "category": n.category, "attributes": n.attributes}
            for n in graph.nodes
        ],
        "edges": [[e.src, e.relation, e.dst] for e in graph.edges],
    }


def graph_from_doc(doc: dict) -> SceneGraph:
    if doc.get("schema") != "scene_graph/1":
        raise FormatError(f"unexpected schema {doc.get('schema')!r}")
    nodes = tuple(
        GraphNode(id=n["id"], category=n["category"], attributes=n.get("attributes", ""))
        for n in doc["nodes"]
    )
    edges = tuple(GraphEdge(src=s, relation=r, dst=d) for s, r, d in doc["edges"])
    return SceneGraph(nodes=nodes, edges=edges)
