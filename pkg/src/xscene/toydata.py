"""Procedural desk-scale corpus: scenes with known occupancy, layout,
descriptions, camera rig, and a deterministic shader for paired images.

Class ids follow the desk world: 0 free, 1 road, 2 sidewalk, 3 vehicle,
4 building, 5 vegetation, 6 pedestrian. Ground surfaces occupy the z=0
voxel layer; objects stand on top of it.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .describe.relations import extract_relations
from .describe.types import EntityRef, SceneDescription, SceneStyle
from .scene.boxes import LANE_POINT_COUNT, Box7, LanePolyline
from .scene.cameras import Camera, camera_looking
from .scene.graphs import GraphEdge, GraphNode, SceneGraph
from .scene.world import DESK_PALETTE, OccupancyGrid, WorldSpec, desk_world

ROAD, SIDEWALK, VEHICLE, BUILDING, VEGETATION, PEDESTRIAN = 1, 2, 3, 4, 5, 6

CAMERA_HEIGHT_M = 1.6
CAMERA_INTRINSICS = (80.0, 80.0, 56.0, 32.0)
CAMERA_IMAGE_SIZE = (64, 112)
CAMERA_YAWS = tuple(i * math.pi / 3.0 for i in range(6))

_WEATHERS = ("sunny", "cloudy", "rainy", "foggy")
_TIMES = ("daytime", "nighttime")
_ENVIRONMENTS = ("downtown", "suburban", "residential", "industrial")


@dataclass
class ToyScene:
    occupancy: OccupancyGrid
    boxes: list[Box7]
    lanes: list[LanePolyline]
    description: SceneDescription
    seed: int = 0
    meta: dict = field(default_factory=dict)


def camera_rig(
    position=(0.0, 0.0, CAMERA_HEIGHT_M),
    yaws=CAMERA_YAWS,
    intrinsics=CAMERA_INTRINSICS,
    image_size=CAMERA_IMAGE_SIZE,
) -> list[Camera]:
    """Six-camera surround rig used for generation and the eval protocol."""
    return [
        camera_looking(
            position=np.asarray(position),
            yaw=yaw,
            intrinsics=intrinsics,
            image_size=image_size,
        )
        for yaw in yaws
    ]


def _voxel_to_meters(world: WorldSpec, i: float, j: float, k: float) -> tuple[float, float, float]:
    lo = world.bounds_min
    vs = world.voxel_size
    return (lo[0] + (i + 0.5) * vs, lo[1] + (j + 0.5) * vs, lo[2] + (k + 0.5) * vs)


# Voxel square kept clear of solid obstacles so the camera rig at the world
# center never starts inside one.
EGO_RESERVE = (28, 36)


def _free_ground_patch(labels, x0, x1, y0, y1) -> bool:
    if labels[x0:x1, y0:y1, :].any():
        return False
    r0, r1 = EGO_RESERVE
    return x1 <= r0 or x0 >= r1 or y1 <= r0 or y0 >= r1


def generate_toy_scene(seed: int, world: WorldSpec | None = None) -> ToyScene:
    world = world or desk_world()
    rng = np.random.default_rng(seed)
    gx, gy, gz = world.grid_dims
    labels = np.zeros((gx, gy, gz), dtype=np.uint8)

    pattern = rng.choice(["h", "v", "x"])
    bands: list[tuple[str, int, int]] = []  # (axis, center, half_width)
    if pattern in ("h", "x"):
        bands.append(("x", int(rng.integers(24, 40)), int(rng.integers(4, 7))))
    if pattern in ("v", "x"):
        bands.append(("y", int(rng.integers(24, 40)), int(rng.integers(4, 7))))

    lanes: list[LanePolyline] = []
    for axis, center, half in bands:
        lo, hi = center - half, center + half
        if axis == "x":  # road runs along x, spanning all rows
            labels[:, lo:hi, 0] = ROAD
            labels[:, max(lo - 2, 0) : lo, 0] = np.where(
                labels[:, max(lo - 2, 0) : lo, 0] == 0, SIDEWALK, labels[:, max(lo - 2, 0) : lo, 0]
            )
            labels[:, hi : hi + 2, 0] = np.where(
                labels[:, hi : hi + 2, 0] == 0, SIDEWALK, labels[:, hi : hi + 2, 0]
            )
            ts = np.linspace(0.5, gx - 0.5, LANE_POINT_COUNT)
            pts = np.stack(
                [
                    world.bounds_min[0] + ts * world.voxel_size,
                    np.full(LANE_POINT_COUNT, world.bounds_min[1] + center * world.voxel_size),
                ],
                axis=1,
            )
        else:  # road runs along y
            labels[lo:hi, :, 0] = ROAD
            labels[max(lo - 2, 0) : lo, :, 0] = np.where(
                labels[max(lo - 2, 0) : lo, :, 0] == 0, SIDEWALK, labels[max(lo - 2, 0) : lo, :, 0]
            )
            labels[hi : hi + 2, :, 0] = np.where(
                labels[hi : hi + 2, :, 0] == 0, SIDEWALK, labels[hi : hi + 2, :, 0]
            )
            ts = np.linspace(0.5, gy - 0.5, LANE_POINT_COUNT)
            pts = np.stack(
                [
                    np.full(LANE_POINT_COUNT, world.bounds_min[0] + center * world.voxel_size),
                    world.bounds_min[1] + ts * world.voxel_size,
                ],
                axis=1,
            )
        lanes.append(LanePolyline(points=pts))

    # Buildings on free ground, rejection-sampled.
    n_buildings = int(rng.integers(2, 5))
    placed = 0
    for _ in range(40):
        if placed >= n_buildings:
            break
        sx = int(rng.integers(6, 14))
        sy = int(rng.integers(6, 14))
        x0 = int(rng.integers(1, gx - sx - 1))
        y0 = int(rng.integers(1, gy - sy - 1))
        if not _free_ground_patch(labels, x0, x0 + sx, y0, y0 + sy):
            continue
        height = int(rng.integers(4, 7))
        labels[x0 : x0 + sx, y0 : y0 + sy, 0:height] = BUILDING
        placed += 1

    # Vegetation blocks near anything free.
    for _ in range(int(rng.integers(2, 6))):
        x0 = int(rng.integers(1, gx - 3))
        y0 = int(rng.integers(1, gy - 3))
        if not _free_ground_patch(labels, x0, x0 + 2, y0, y0 + 2):
            continue
        height = int(rng.integers(2, 4))
        labels[x0 : x0 + 2, y0 : y0 + 2, 0:height] = VEGETATION

    boxes: list[Box7] = []
    instance = 1

    # Vehicles on the road bands (footprint 4 along the band, 2 across).
    for axis, center, half in bands:
        for _ in range(int(rng.integers(1, 4))):
            offset = int(rng.integers(-half + 1, half - 1))
            if axis == "x":
                i = int(rng.integers(4, gx - 8))
                j = center + offset
                i0, i1, j0, j1 = i, i + 4, j - 1, j + 1
                yaw = 0.0 if rng.random() < 0.5 else math.pi
            else:
                j = int(rng.integers(4, gy - 8))
                i = center + offset
                i0, i1, j0, j1 = i - 1, i + 1, j, j + 4
                yaw = math.pi / 2 if rng.random() < 0.5 else -math.pi / 2
            i0, i1 = max(i0, 0), min(i1, gx)
            j0, j1 = max(j0, 0), min(j1, gy)
            r0, r1 = EGO_RESERVE
            overlaps_ego = i1 > r0 and i0 < r1 and j1 > r0 and j0 < r1
            if overlaps_ego or labels[i0:i1, j0:j1, 1:3].size == 0 or labels[i0:i1, j0:j1, 1:3].any():
                continue
            labels[i0:i1, j0:j1, 1:3] = VEHICLE
            cx, cy, _ = _voxel_to_meters(world, (i0 + i1) / 2 - 0.5, (j0 + j1) / 2 - 0.5, 0)
            boxes.append(
                Box7(
                    center=(cx, cy, 2.0),
                    dims=(4.0, 2.0, 2.0),
                    yaw=yaw,
                    class_id=VEHICLE,
                    instance_id=instance,
                )
            )
            instance += 1

    # Pedestrians on sidewalks (2x2 footprint).
    sidewalk_cells = np.argwhere(labels[:, :, 0] == SIDEWALK)
    for _ in range(int(rng.integers(0, 3))):
        if len(sidewalk_cells) == 0:
            break
        i, j = sidewalk_cells[int(rng.integers(0, len(sidewalk_cells)))]
        i0, i1 = int(i), min(int(i) + 2, gx)
        j0, j1 = int(j), min(int(j) + 2, gy)
        if labels[i0:i1, j0:j1, 1:3].any():
            continue
        labels[i0:i1, j0:j1, 1:3] = PEDESTRIAN
        cx, cy, _ = _voxel_to_meters(world, (i0 + i1) / 2 - 0.5, (j0 + j1) / 2 - 0.5, 0)
        boxes.append(
            Box7(
                center=(cx, cy, 2.0),
                dims=(2.0, 2.0, 2.0),
                yaw=0.0,
                class_id=PEDESTRIAN,
                instance_id=instance,
            )
        )
        instance += 1

    description = build_scene_description(rng, labels, boxes, lanes, pattern)
    return ToyScene(
        occupancy=OccupancyGrid(world, labels),
        boxes=boxes,
        lanes=lanes,
        description=description,
        seed=seed,
        meta={"pattern": str(pattern), "bands": bands},
    )


def build_scene_description(
    rng: np.random.Generator,
    labels: np.ndarray,
    boxes: list[Box7],
    lanes: list[LanePolyline],
    pattern: str,
) -> SceneDescription:
    style = SceneStyle(
        time_of_day=str(rng.choice(_TIMES)),
        weather=str(rng.choice(_WEATHERS)),
        environment=str(rng.choice(_ENVIRONMENTS)),
        road_condition="intersection" if pattern == "x" else "straight road",
    )
    vehicle_attrs = ("parked", "moving slowly", "waiting", "turning")
    foreground = []
    for box in boxes:
        if box.class_id == VEHICLE:
            foreground.append(EntityRef("vehicle", str(rng.choice(vehicle_attrs))))
        else:
            foreground.append(EntityRef("pedestrian", "walking"))
    background = [EntityRef("road", "asphalt")]
    if (labels[:, :, 0] == SIDEWALK).any():
        background.append(EntityRef("sidewalk", "concrete"))
    if (labels == BUILDING).any():
        background.append(EntityRef("building", "mid-rise"))
    if (labels == VEGETATION).any():
        background.append(EntityRef("vegetation", "trees"))

    # Names follow the foreground-then-background counting convention.
    counts: dict[str, int] = {}
    names = []
    for ref in foreground:
        counts[ref.category] = counts.get(ref.category, 0) + 1
        names.append(f"{ref.category}{counts[ref.category]}")
    named_boxes = list(zip(names, boxes))
    lane_names = []
    counts_bg: dict[str, int] = dict(counts)
    for ref in background:
        counts_bg[ref.category] = counts_bg.get(ref.category, 0) + 1
        if ref.category == "road":
            lane_names.append(f"{ref.category}{counts_bg[ref.category]}")
    triples = extract_relations(named_boxes, list(zip(lane_names, lanes)))
    abstract = (
        f"A {style.weather} {style.time_of_day} scene in a {style.environment} area "
        f"with {sum(1 for b in boxes if b.class_id == VEHICLE)} vehicles on "
        f"a {style.road_condition}."
    )
    return SceneDescription(
        style=style,
        foreground=tuple(foreground),
        background=tuple(background),
        textual_layout=tuple(triples),
        abstract=abstract,
    )


def generate_toy_corpus(count: int, seed: int = 0, world: WorldSpec | None = None) -> list[ToyScene]:
    return [generate_toy_scene(seed * 100003 + i, world) for i in range(count)]


def scene_graph_for(scene: ToyScene) -> SceneGraph:
    """Graph whose nodes own exactly the scene's boxes then lanes, in order."""
    nodes = []
    names = []
    counts: dict[str, int] = {}
    for box in scene.boxes:
        category = "vehicle" if box.class_id == VEHICLE else "pedestrian"
        counts[category] = counts.get(category, 0) + 1
        name = f"{category}{counts[category]}"
        names.append(name)
        nodes.append(GraphNode(id=name, category=category))
    for i, _ in enumerate(scene.lanes):
        nodes.append(GraphNode(id=f"lane{i + 1}", category="lane"))
    edge_set = extract_relations(list(zip(names, scene.boxes)))
    edges = tuple(GraphEdge(s, r, o) for s, r, o in edge_set if o != "ego")
    return SceneGraph(nodes=tuple(nodes), edges=edges)


# --- relation corpus for layout training --------------------------------

RELATION_DELTAS = {
    "front_of": ((5.0, 10.0), (-2.0, 2.0)),
    "behind": ((-10.0, -5.0), (-2.0, 2.0)),
    "left_of": ((-2.0, 2.0), (5.0, 10.0)),
    "right_of": ((-2.0, 2.0), (-10.0, -5.0)),
}


def relation_layout_sample(
    seed: int, relation: str, world: WorldSpec | None = None
) -> tuple[SceneGraph, list[Box7], list[LanePolyline]]:
    """Two vehicles with a deterministic geometric relation plus one lane.

    ``A <relation> B``: the displacement A - B is drawn from the relation's
    box (front_of means 5..10 m further along +x, within +-2 m laterally).
    """
    world = world or desk_world()
    rng = np.random.default_rng(seed)
    (dx_lo, dx_hi), (dy_lo, dy_hi) = RELATION_DELTAS[relation]
    bx = float(rng.uniform(-12, 2))
    by = float(rng.uniform(-8, 8))
    ax = bx + float(rng.uniform(dx_lo, dx_hi))
    ay = by + float(rng.uniform(dy_lo, dy_hi))
    dims = lambda: tuple(np.array([4.0, 2.0, 2.0]) * rng.uniform(0.9, 1.1))
    yaw = lambda: float(rng.normal(0.0, 0.05))
    box_a = Box7((ax, ay, 2.0), dims(), yaw(), class_id=VEHICLE, instance_id=1)
    box_b = Box7((bx, by, 2.0), dims(), yaw(), class_id=VEHICLE, instance_id=2)
    lane_y = float(rng.uniform(-10, 10))
    ts = np.linspace(world.bounds_min[0] + 1, world.bounds_max[0] - 1, LANE_POINT_COUNT)
    lane = LanePolyline(np.stack([ts, np.full(LANE_POINT_COUNT, lane_y)], axis=1))
    graph = SceneGraph(
        nodes=(
            GraphNode("vehicle1", "vehicle"),
            GraphNode("vehicle2", "vehicle"),
            GraphNode("lane1", "lane"),
        ),
        edges=(GraphEdge("vehicle1", relation, "vehicle2"),),
    )
    return graph, [box_a, box_b], [lane]


def relation_corpus(count: int, seed: int = 0, relations=("front_of", "behind", "left_of", "right_of")):
    samples = []
    for i in range(count):
        relation = relations[i % len(relations)]
        samples.append((relation, *relation_layout_sample(seed * 7919 + i, relation)))
    return samples


# --- deterministic shader -------------------------------------------------

def _pixel_noise(h: int, w: int, seed: int, amplitude: float) -> np.ndarray:
    """Deterministic per-pixel noise field from a hash of the seed."""
    digest = hashlib.blake2b(f"shader:{seed}".encode(), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    return rng.uniform(-amplitude, amplitude, size=(h, w, 1))


SKY_COLOR = np.array([0.70, 0.78, 0.86])


def shade_rasters(
    semantic: np.ndarray,
    depth: np.ndarray,
    palette: dict[int, tuple[int, int, int]] | None = None,
    texture_amplitude: float = 0.03,
    texture_seed: int = 0,
) -> np.ndarray:
    """Deterministic 'photo' from rendered semantics and depth.

    Class base color, darkened with distance, plus a small hash-noise
    texture; empty pixels get a flat sky color.
    """
    palette = palette or DESK_PALETTE
    h, w = semantic.shape
    base = np.zeros((h, w, 3))
    for cls, rgb in palette.items():
        base[semantic == cls] = np.asarray(rgb) / 255.0
    shadefac = np.where(np.isfinite(depth), 0.45 + 0.55 * np.exp(-np.where(np.isfinite(depth), depth, 0) / 40.0), 1.0)
    img = base * shadefac[..., None]
    img = img + _pixel_noise(h, w, texture_seed, texture_amplitude)
    sky = ~np.isfinite(depth)
    img[sky] = SKY_COLOR
    return np.clip(img, 0.0, 1.0)
