"""Pipeline stages: full generation, chunked extension, and graph edits.

Every stage derives its seed from the request seed, records it in the
published record, and writes artifacts into a staging directory that the
store publishes atomically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..describe import (
    SceneDescription,
    describe_prompt,
    parse_textual_layout,
)
from ..imgdiff import (
    ExtrapPair,
    MultiViewBatch,
    RenderedScene,
    extrapolate_views,
    sample_views,
)
from ..imgdiff.training import PERSPECTIVE_CLASS_IDS
from ..layout import sample_layout
from ..occdiff import (
    RawConditions,
    ResampleSpec,
    outpaint_triplane,
    plan_chunk_masks,
    sample_occupancy_latents,
    shift_reference,
)
from ..render import (
    rasterize,
    voxels_to_gaussians,
    write_disparity_png,
    write_rgb_png,
    write_semantic_png,
)
from ..render.pngio import read_disparity_png, read_rgb_png
from ..scene import (
    Box7,
    GraphEdge,
    GraphNode,
    SceneGraph,
    camera_looking,
    project_layout_to_perspective,
    validate_scene_graph,
)
from ..scene.io import (
    dump_json,
    graph_from_doc,
    graph_to_doc,
    layout_from_doc,
    layout_to_doc,
    load_json,
    save_occupancy,
    load_occupancy,
)
from ..describe.types import description_from_doc, description_to_doc
from ..toydata import CAMERA_IMAGE_SIZE, CAMERA_INTRINSICS, CAMERA_YAWS, ToyScene, camera_rig
from ..triplane import Triplane
from .runtime import Runtime
from .store import SceneStore

RECORD_SCHEMA = "scene_record/1"

# Stages in execution order; job state mirrors these.
STAGES = ("describing", "laying_out", "generating_occ", "rendering", "generating_views")

# Description categories that own geometry in the layout graph.
BOX_CATEGORY_MAP = {
    "car": "vehicle",
    "truck": "vehicle",
    "bus": "vehicle",
    "vehicle": "vehicle",
    "van": "vehicle",
    "motorcycle": "vehicle",
    "pedestrian": "pedestrian",
    "person": "pedestrian",
}
LANE_CATEGORIES = ("road", "lane", "driveable_surface")

EGO_BOX = Box7(center=(0.0, 0.0, 2.0), dims=(4.0, 2.0, 2.0), yaw=0.0, class_id=3, instance_id=0)


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class GenerateRequest:
    prompt: str | None = None
    layout_doc: dict | None = None
    description_doc: dict | None = None
    seed: int = 0

    def __post_init__(self):
        if (self.prompt is None) == (self.layout_doc is None):
            raise ValueError("request needs exactly one of prompt or layout")


def stage_seed(seed: int, stage: str) -> int:
    return (seed * 1_000_003 + STAGES.index(stage)) % (2**31 - 1)


def layout_graph_from_description(desc: SceneDescription) -> SceneGraph:
    """Scene graph restricted to geometry-owning nodes plus the ego anchor."""
    scene_graph = parse_textual_layout(desc.textual_layout, desc)
    categories = {n.id: n.category for n in scene_graph.nodes}
    nodes = [GraphNode("ego", "ego")]
    keep: set[str] = {"ego"}
    for name, ref in desc.entities():
        if ref.category in BOX_CATEGORY_MAP:
            nodes.append(GraphNode(name, BOX_CATEGORY_MAP[ref.category], ref.attributes))
            keep.add(name)
    lane_count = 0
    for name, ref in desc.entities():
        if ref.category in LANE_CATEGORIES and lane_count < 2:
            nodes.append(GraphNode(name, "lane", ref.attributes))
            keep.add(name)
            lane_count += 1
    edges = tuple(
        GraphEdge(e.src, e.relation, e.dst)
        for e in scene_graph.edges
        if e.src in keep and e.dst in keep
    )
    return SceneGraph(nodes=tuple(nodes), edges=edges)


def _rig():
    return camera_rig()


def _camera_doc(cam) -> dict:
    return {
        "intrinsics": list(cam.intrinsics),
        "rotation": cam.rotation.tolist(),
        "translation": cam.translation.tolist(),
        "image_size": list(cam.image_size),
    }


def render_rasters(
    runtime: Runtime, occ, boxes, lanes, out_dir: Path
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Semantic/depth/perspective rasters for the rig; PNG dumps in out_dir."""
    out_dir.mkdir(parents=True, exist_ok=True)
    cams = _rig()
    prims = voxels_to_gaussians(occ)
    semantics, depths, persps = [], [], []
    for i, cam in enumerate(cams):
        semantic, depth = rasterize(prims, cam, class_count=occ.world.class_count)
        pm = project_layout_to_perspective(boxes, lanes, cam, class_ids=PERSPECTIVE_CLASS_IDS)
        write_semantic_png(semantic, occ.world.palette, out_dir / f"semantic_{i}.png")
        write_disparity_png(depth, out_dir / f"disparity_{i}.png")
        semantics.append(semantic)
        depths.append(depth)
        persps.append(np.moveaxis(pm.data, -1, 0))
    dump_json(
        {"schema": "rasters/1", "cameras": [_camera_doc(c) for c in cams]},
        out_dir / "rasters.json",
    )
    return np.stack(semantics), np.stack(depths), np.stack(persps).astype(np.float32)


def _rendered_scene(occ, boxes, lanes, description, semantics, depths, persps, cameras, images=None):
    scene = ToyScene(
        occupancy=occ, boxes=boxes, lanes=lanes, description=description, seed=0
    )
    if images is None:
        v = len(cameras)
        h, w = cameras[0].image_size
        images = np.zeros((v, h, w, 3))
    return RenderedScene(
        images=images, semantic=semantics, depth=depths, perspective=persps,
        cameras=cameras, scene=scene,
    )


def write_views(batch: MultiViewBatch, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, image in enumerate(batch.images):
        write_rgb_png(image, out_dir / f"view_{i}.png")
    dump_json(
        {"schema": "views/1", "cameras": [_camera_doc(c) for c in batch.cameras]},
        out_dir / "views.json",
    )


def run_generate(
    runtime: Runtime,
    request: GenerateRequest,
    staging: Path,
    on_stage=None,
    chunk_origin=(0.0, 0.0),
    extra_provenance: dict | None = None,
) -> dict:
    """Execute the stage sequence into ``staging`` and return the record."""

    def enter(stage: str):
        if on_stage is not None:
            on_stage(stage)

    world = runtime.world
    seeds = {}

    # -- describe -----------------------------------------------------------
    if request.prompt is not None:
        enter("describing")
        seeds["describe"] = stage_seed(request.seed, "describing")
        try:
            description = describe_prompt(
                request.prompt, runtime.bank, runtime.clients, k=runtime.config.retrieval_k
            )
        except Exception as exc:
            raise PipelineError("describing", str(exc)) from exc
        graph = layout_graph_from_description(description)
        report = validate_scene_graph(graph)
        if not report.valid:
            raise PipelineError("describing", f"invalid graph: {report.findings}")
        boxes = lanes = None
    else:
        if request.description_doc is not None:
            description = description_from_doc(request.description_doc)
        else:
            description = _default_description()
        boxes, lanes = layout_from_doc(request.layout_doc)
        graph = None

    dump_json(description_to_doc(description), staging / "description.json")

    # -- layout -------------------------------------------------------------
    if boxes is None:
        enter("laying_out")
        seed = stage_seed(request.seed, "laying_out")
        seeds["layout"] = seed
        dump_json(graph_to_doc(graph), staging / "graph.json")
        try:
            sampled_boxes, sampled_lanes, by_id = sample_layout(
                graph, runtime.layout_model, runtime.layout_schedule, world, seed=seed,
                anchors={"ego": EGO_BOX},
            )
        except Exception as exc:
            raise PipelineError("laying_out", str(exc)) from exc
        boxes = [
            by_id[n.id]
            for n in graph.nodes
            if n.category not in ("lane", "ego") and n.id in by_id
        ]
        lanes = sampled_lanes
    dump_json(layout_to_doc(boxes, lanes), staging / "layout.json")

    # -- occupancy ------------------------------------------------------------
    enter("generating_occ")
    seed = stage_seed(request.seed, "generating_occ")
    seeds["occupancy"] = seed
    raw = RawConditions(world=world, boxes=boxes, lanes=lanes, description=description)
    try:
        bundle = runtime.occ_model.conditions(raw)
        h = sample_occupancy_latents(
            runtime.occ_model, bundle, runtime.occ_schedule, runtime.occ_scale,
            runtime.occ_plane_dims, seed=seed, steps=runtime.config.sample_steps,
            cfg_scale=runtime.config.cfg_scale,
        )
        occ = runtime.vae.decode_triplane(h, world)
    except Exception as exc:
        raise PipelineError("generating_occ", str(exc)) from exc
    h.save(staging / "triplane")
    save_occupancy(occ, staging / "occupancy.occ")

    # -- render ----------------------------------------------------------------
    enter("rendering")
    try:
        semantics, depths, persps = render_rasters(runtime, occ, boxes, lanes, staging / "rasters")
    except Exception as exc:
        raise PipelineError("rendering", str(exc)) from exc

    # -- views -------------------------------------------------------------------
    enter("generating_views")
    seed = stage_seed(request.seed, "generating_views")
    seeds["views"] = seed
    try:
        rendered = _rendered_scene(occ, boxes, lanes, description, semantics, depths, persps, _rig())
        batch = sample_views(
            runtime.image_model, rendered, runtime.image_schedule, seed=seed,
            steps=runtime.config.sample_steps, cfg_scale=runtime.config.cfg_scale,
        )
    except Exception as exc:
        raise PipelineError("generating_views", str(exc)) from exc
    write_views(batch, staging / "views")

    record = {
        "schema": RECORD_SCHEMA,
        "chunk_origin": list(chunk_origin),
        "request": {
            "prompt": request.prompt,
            "had_layout": request.layout_doc is not None,
            "seed": request.seed,
        },
        "seeds": seeds,
        "model_versions": runtime.model_versions,
        "artifacts": {
            "description": "description.json",
            "graph": "graph.json" if (staging / "graph.json").exists() else None,
            "layout": "layout.json",
            "triplane": "triplane",
            "occupancy": "occupancy.occ",
            "rasters": "rasters",
            "views": "views",
        },
        "provenance": extra_provenance or {},
    }
    dump_json(record, staging / "record.json")
    return record


def _default_description() -> SceneDescription:
    from ..describe.types import EntityRef, SceneStyle

    return SceneDescription(
        style=SceneStyle("daytime", "sunny", "suburban", "straight road"),
        foreground=(),
        background=(EntityRef("road", "asphalt"),),
        textual_layout=(),
        abstract="A plain scene generated from an explicit layout.",
    )


DIRECTION_VECTORS = {
    "+x": np.array([1.0, 0.0]),
    "-x": np.array([-1.0, 0.0]),
    "+y": np.array([0.0, 1.0]),
    "-y": np.array([0.0, -1.0]),
}


def run_extend(
    runtime: Runtime,
    store: SceneStore,
    scene_id: str,
    direction: str,
    count: int,
    seed: int,
    on_stage=None,
) -> list[str]:
    """Outpaint ``count`` chunks in ``direction``; returns new scene ids."""
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return []
    if direction not in DIRECTION_VECTORS:
        raise ValueError(f"unknown direction {direction!r}")
    if direction in store.neighbors(scene_id):
        raise PipelineError("laying_out", f"direction {direction} already occupied")

    world = runtime.world
    overlap = runtime.config.overlap_fraction
    extent = world.extent[0] if direction in ("+x", "-x") else world.extent[1]
    stride = (1.0 - overlap) * extent
    dir_vec = DIRECTION_VECTORS[direction]

    new_ids = []
    current_id = scene_id
    for k in range(count):
        record = store.record(current_id)
        scene_dir = store.scene_dir(current_id)
        h_ref = Triplane.load(scene_dir / "triplane")
        description = description_from_doc(load_json(scene_dir / "description.json"))
        prev_boxes, prev_lanes = layout_from_doc(load_json(scene_dir / "layout.json"))
        origin = np.asarray(record["chunk_origin"], dtype=float)
        new_origin = origin + stride * dir_vec

        staging = store.new_staging_dir()
        try:
            new_id = _extend_once(
                runtime, staging, h_ref, description, prev_boxes, prev_lanes,
                direction, overlap, stride, seed + k, new_origin, scene_dir,
                parent_id=current_id, on_stage=on_stage,
            )
        except Exception:
            raise
        published = store.publish(staging, new_id)
        store.link(current_id, direction, published)
        new_ids.append(published)
        current_id = published
    return new_ids


def _extend_once(
    runtime, staging, h_ref, description, prev_boxes, prev_lanes, direction,
    overlap, stride, seed, new_origin, prev_dir, parent_id, on_stage=None,
):
    def enter(stage):
        if on_stage is not None:
            on_stage(stage)

    world = runtime.world
    x_h, y_h, z_h, _ = runtime.occ_plane_dims
    dir_vec = DIRECTION_VECTORS[direction]

    # Layout for the new chunk: resample with the same style, then carry
    # boxes from the reference that fall inside the shared band.
    enter("laying_out")
    graph = layout_graph_from_description(description)
    _, lanes, by_id = sample_layout(
        graph, runtime.layout_model, runtime.layout_schedule, world,
        seed=stage_seed(seed, "laying_out"), anchors={"ego": EGO_BOX},
    )
    boxes = [
        by_id[n.id]
        for n in graph.nodes
        if n.category not in ("lane", "ego") and n.id in by_id
    ]
    shift3 = np.array([stride * dir_vec[0], stride * dir_vec[1], 0.0])
    margin = 1.0
    lo = np.asarray(world.bounds_min) + margin
    hi = np.asarray(world.bounds_max) - margin
    propagated = []
    for box in prev_boxes:
        center = np.asarray(box.center) - shift3
        if np.all(center >= lo) and np.all(center <= hi):
            propagated.append(
                Box7(tuple(center), box.dims, box.yaw, box.class_id, box.instance_id + 100)
            )
    boxes = propagated + boxes
    dump_json(description_to_doc(description), staging / "description.json")
    dump_json(graph_to_doc(graph), staging / "graph.json")
    dump_json(layout_to_doc(boxes, lanes), staging / "layout.json")

    enter("generating_occ")
    mask = plan_chunk_masks(direction, overlap, x_h, y_h, z_h)
    reference = shift_reference(h_ref, direction, overlap)
    raw = RawConditions(world=world, boxes=boxes, lanes=lanes, description=description)
    bundle = runtime.occ_model.conditions(raw)
    h_new = outpaint_triplane(
        runtime.occ_model, reference, mask, bundle, runtime.occ_schedule,
        runtime.occ_scale, seed=stage_seed(seed, "generating_occ"),
        resample=ResampleSpec(5, 20), cfg_scale=runtime.config.cfg_scale,
    )
    occ = runtime.vae.decode_triplane(h_new, world)
    h_new.save(staging / "triplane")
    save_occupancy(occ, staging / "occupancy.occ")

    enter("rendering")
    semantics, depths, persps = render_rasters(runtime, occ, boxes, lanes, staging / "rasters")

    enter("generating_views")
    cams = _rig()
    target = _rendered_scene(occ, boxes, lanes, description, semantics, depths, persps, cams)
    if runtime.extrap_model is not None:
        ref_images = np.stack(
            [read_rgb_png(prev_dir / "views" / f"view_{i}.png") for i in range(len(cams))]
        )
        ref_disp = np.stack(
            [
                read_disparity_png(prev_dir / "rasters" / f"disparity_{i}.png")
                for i in range(len(cams))
            ]
        )
        ref_depth = np.where(ref_disp > 0, 1.0 / np.maximum(ref_disp, 1e-9), np.inf)
        # The reference rig sits one stride behind the new chunk's origin.
        ref_cams = camera_rig(position=(-shift3[0], -shift3[1], 1.6))
        reference_scene = RenderedScene(
            images=ref_images, semantic=semantics, depth=ref_depth,
            perspective=persps, cameras=ref_cams, scene=target.scene,
        )
        pair = ExtrapPair(reference=reference_scene, target=target, shift=-shift3[:2])
        batch, _ = extrapolate_views(
            runtime.extrap_model, pair, runtime.image_schedule,
            seed=stage_seed(seed, "generating_views"),
            steps=runtime.config.sample_steps, cfg_scale=runtime.config.cfg_scale,
        )
    else:
        batch = sample_views(
            runtime.image_model, target, runtime.image_schedule,
            seed=stage_seed(seed, "generating_views"),
            steps=runtime.config.sample_steps, cfg_scale=runtime.config.cfg_scale,
        )
    write_views(batch, staging / "views")

    record = {
        "schema": RECORD_SCHEMA,
        "chunk_origin": [float(v) for v in new_origin],
        "request": {"extend": direction, "seed": seed},
        "seeds": {stage: stage_seed(seed, stage) for stage in STAGES[1:]},
        "model_versions": runtime.model_versions,
        "artifacts": {
            "description": "description.json",
            "graph": "graph.json",
            "layout": "layout.json",
            "triplane": "triplane",
            "occupancy": "occupancy.occ",
            "rasters": "rasters",
            "views": "views",
        },
        "provenance": {"parent": parent_id, "direction": direction},
    }
    dump_json(record, staging / "record.json")
    return None  # content-addressed id assigned at publish


@dataclass
class EditOp:
    op: str  # remove | add | move | set_attribute | set_relation
    node: str | None = None
    category: str | None = None
    attributes: str = ""
    box: dict | None = None
    relation: tuple[str, str, str] | None = None


def parse_edit_payload(payload: dict, graph: SceneGraph, llm) -> EditOp:
    """Structured payloads pass through; free text routes through the LLM."""
    if "text" in payload:
        import json as _json

        response = llm.complete(
            {
                "task": "edit_routing",
                "text": payload["text"],
                "nodes": [
                    {"id": n.id, "category": n.category, "attributes": n.attributes}
                    for n in graph.nodes
                ],
            }
        )
        doc = _json.loads(response)
        return EditOp(op=doc["op"], node=doc.get("node"))
    return EditOp(
        op=payload["op"],
        node=payload.get("node"),
        category=payload.get("category"),
        attributes=payload.get("attributes", ""),
        box=payload.get("box"),
        relation=tuple(payload["relation"]) if payload.get("relation") else None,
    )


def apply_edit_to_graph(graph: SceneGraph, edit: EditOp) -> SceneGraph:
    ids = {n.id for n in graph.nodes}
    if edit.op == "noop":
        return graph
    if edit.op == "remove":
        if edit.node not in ids:
            raise PipelineError("laying_out", f"cannot remove unknown node {edit.node!r}")
        nodes = tuple(n for n in graph.nodes if n.id != edit.node)
        edges = tuple(
            e for e in graph.edges if e.src != edit.node and e.dst != edit.node
        )
        return SceneGraph(nodes, edges)
    if edit.op == "add":
        if edit.node in ids:
            raise PipelineError("laying_out", f"node {edit.node!r} already exists")
        nodes = graph.nodes + (GraphNode(edit.node, edit.category or "vehicle", edit.attributes),)
        edges = graph.edges
        if edit.relation:
            edges = edges + (GraphEdge(*edit.relation),)
        return SceneGraph(nodes, edges)
    if edit.op == "set_attribute":
        if edit.node not in ids:
            raise PipelineError("laying_out", f"unknown node {edit.node!r}")
        nodes = tuple(
            GraphNode(n.id, n.category, edit.attributes) if n.id == edit.node else n
            for n in graph.nodes
        )
        return SceneGraph(nodes, graph.edges)
    if edit.op == "set_relation":
        if edit.relation is None:
            raise PipelineError("laying_out", "set_relation needs a relation triple")
        src, _, dst = edit.relation
        edges = tuple(e for e in graph.edges if not (e.src == src and e.dst == dst))
        return SceneGraph(graph.nodes, edges + (GraphEdge(*edit.relation),))
    if edit.op == "move":
        # Geometry-only edit; the graph is unchanged, anchoring handles it.
        if edit.node not in ids:
            raise PipelineError("laying_out", f"unknown node {edit.node!r}")
        return graph
    raise PipelineError("laying_out", f"unknown edit op {edit.op!r}")


def run_edit(
    runtime: Runtime,
    store: SceneStore,
    scene_id: str,
    payload: dict,
    seed: int,
    staging: Path,
    on_stage=None,
) -> dict:
    """Mutate the scene graph, re-sample anchored layout, regenerate."""
    scene_dir = store.scene_dir(scene_id)
    description = description_from_doc(load_json(scene_dir / "description.json"))
    graph_path = scene_dir / "graph.json"
    if graph_path.exists():
        graph = graph_from_doc(load_json(graph_path))
    else:
        graph = layout_graph_from_description(description)
    old_boxes, _ = layout_from_doc(load_json(scene_dir / "layout.json"))

    edit = parse_edit_payload(payload, graph, runtime.clients.llm)
    new_graph = apply_edit_to_graph(graph, edit)

    # Anchor every surviving node that already had a box, except a moved node,
    # which anchors at its requested parameters instead.
    anchors = {"ego": EGO_BOX}
    box_nodes = [n for n in graph.nodes if n.category not in ("lane", "ego")]
    surviving = {n.id for n in new_graph.nodes}
    for node, box in zip(box_nodes, old_boxes):
        if node.id not in surviving:
            continue
        if edit.op == "move" and node.id == edit.node:
            doc = dict(edit.box or {})
            anchors[node.id] = Box7(
                center=tuple(doc.get("center", box.center)),
                dims=tuple(doc.get("dims", box.dims)),
                yaw=float(doc.get("yaw", box.yaw)),
                class_id=box.class_id,
                instance_id=box.instance_id,
            )
        else:
            anchors[node.id] = box

    def enter(stage):
        if on_stage is not None:
            on_stage(stage)

    enter("laying_out")
    world = runtime.world
    _, lanes, by_id = sample_layout(
        new_graph, runtime.layout_model, runtime.layout_schedule, world,
        seed=stage_seed(seed, "laying_out"), anchors=anchors,
    )
    boxes = [
        by_id[n.id]
        for n in new_graph.nodes
        if n.category not in ("lane", "ego") and n.id in by_id
    ]
    dump_json(description_to_doc(description), staging / "description.json")
    dump_json(graph_to_doc(new_graph), staging / "graph.json")
    dump_json(layout_to_doc(boxes, lanes), staging / "layout.json")

    enter("generating_occ")
    raw = RawConditions(world=world, boxes=boxes, lanes=lanes, description=description)
    bundle = runtime.occ_model.conditions(raw)
    h = sample_occupancy_latents(
        runtime.occ_model, bundle, runtime.occ_schedule, runtime.occ_scale,
        runtime.occ_plane_dims, seed=stage_seed(seed, "generating_occ"),
        steps=runtime.config.sample_steps, cfg_scale=runtime.config.cfg_scale,
    )
    occ = runtime.vae.decode_triplane(h, world)
    h.save(staging / "triplane")
    save_occupancy(occ, staging / "occupancy.occ")

    enter("rendering")
    semantics, depths, persps = render_rasters(runtime, occ, boxes, lanes, staging / "rasters")

    enter("generating_views")
    rendered = _rendered_scene(occ, boxes, lanes, description, semantics, depths, persps, _rig())
    batch = sample_views(
        runtime.image_model, rendered, runtime.image_schedule,
        seed=stage_seed(seed, "generating_views"),
        steps=runtime.config.sample_steps, cfg_scale=runtime.config.cfg_scale,
    )
    write_views(batch, staging / "views")

    source = store.record(scene_id)
    record = {
        "schema": RECORD_SCHEMA,
        "chunk_origin": source["chunk_origin"],
        "request": {"edit": payload, "seed": seed},
        "seeds": {stage: stage_seed(seed, stage) for stage in STAGES[1:]},
        "model_versions": runtime.model_versions,
        "artifacts": {
            "description": "description.json",
            "graph": "graph.json",
            "layout": "layout.json",
            "triplane": "triplane",
            "occupancy": "occupancy.occ",
            "rasters": "rasters",
            "views": "views",
        },
        "provenance": {"parent": scene_id, "edit": payload},
    }
    dump_json(record, staging / "record.json")
    return record
