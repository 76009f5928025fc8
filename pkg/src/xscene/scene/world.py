"""World geometry, semantic occupancy grids, and label mapping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BOUNDS_ATOL = 1e-6


class LabelMappingError(ValueError):
    """Raised when an occupancy grid contains classes the mapping does not cover."""


@dataclass(frozen=True)
class WorldSpec:
    """Axis-aligned world volume discretized into a dense voxel grid.

    Class 0 is always free space. ``grid_dims`` is (X, Y, Z) voxel counts;
    ``voxel_size`` is in meters and must tile the bounds exactly.
    """

    bounds_min: tuple[float, float, float]
    bounds_max: tuple[float, float, float]
    grid_dims: tuple[int, int, int]
    voxel_size: float
    class_count: int
    class_names: tuple[str, ...] = ()
    palette: dict[int, tuple[int, int, int]] = field(default_factory=dict)

    def __post_init__(self):
        lo = np.asarray(self.bounds_min, dtype=np.float64)
        hi = np.asarray(self.bounds_max, dtype=np.float64)
        if not np.all(hi > lo):
            raise ValueError(f"bounds_max must exceed bounds_min componentwise: {lo} vs {hi}")
        dims = np.asarray(self.grid_dims, dtype=np.int64)
        if dims.shape != (3,) or np.any(dims <= 0):
            raise ValueError(f"grid_dims must be three positive integers, got {self.grid_dims}")
        extent = hi - lo
        if not np.allclose(dims * self.voxel_size, extent, atol=BOUNDS_ATOL):
            raise ValueError(
                f"grid_dims*voxel_size {dims * self.voxel_size} does not match extent {extent}"
            )
        if self.class_count < 1 or self.class_count > 256:
            raise ValueError(f"class_count must be in [1, 256], got {self.class_count}")
        if self.class_names and len(self.class_names) != self.class_count:
            raise ValueError("class_names length must equal class_count")
        if self.class_names and self.class_names[0] != "free":
            raise ValueError("class 0 must be named 'free'")

    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.bounds_max, dtype=np.float64) - np.asarray(
            self.bounds_min, dtype=np.float64
        )

    def voxel_centers(self) -> np.ndarray:
        """(X, Y, Z, 3) array of voxel-center world coordinates."""
        lo = np.asarray(self.bounds_min, dtype=np.float64)
        axes = [
            lo[a] + (np.arange(self.grid_dims[a], dtype=np.float64) + 0.5) * self.voxel_size
            for a in range(3)
        ]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        return np.stack([gx, gy, gz], axis=-1)

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        lo = np.asarray(self.bounds_min)
        hi = np.asarray(self.bounds_max)
        return np.all((pts >= lo) & (pts <= hi), axis=-1)

    def world_to_voxel(self, points: np.ndarray) -> np.ndarray:
        """Continuous voxel-index coordinates (voxel i spans [i, i+1))."""
        pts = np.asarray(points, dtype=np.float64)
        return (pts - np.asarray(self.bounds_min)) / self.voxel_size


@dataclass(frozen=True)
class OccupancyGrid:
    """Dense semantic label volume over a :class:`WorldSpec`."""

    world: WorldSpec
    labels: np.ndarray

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if labels.shape != tuple(self.world.grid_dims):
            raise ValueError(
                f"label volume shape {labels.shape} != grid_dims {self.world.grid_dims}"
            )
        if labels.size and int(labels.max()) >= self.world.class_count:
            raise ValueError(
                f"label {int(labels.max())} out of range for class_count {self.world.class_count}"
            )
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @classmethod
    def empty(cls, world: WorldSpec) -> "OccupancyGrid":
        return cls(world, np.zeros(world.grid_dims, dtype=np.uint8))

    def occupied_mask(self) -> np.ndarray:
        return self.labels != 0

    def with_labels(self, labels: np.ndarray) -> "OccupancyGrid":
        return OccupancyGrid(self.world, labels)


def map_labels(grid: OccupancyGrid, mapping: dict[int, int]) -> OccupancyGrid:
    """Relabel every voxel through ``mapping``.

    The mapping must cover every class present in the grid; the output world
    gets ``class_count = max(mapping.values()) + 1`` so mapped ids stay dense.
    """
    present = np.unique(grid.labels)
    missing = [int(c) for c in present if int(c) not in mapping]
    if missing:
        raise LabelMappingError(f"mapping does not cover classes present in grid: {missing}")
    lut = np.zeros(256, dtype=np.uint8)
    for src, dst in mapping.items():
        if not (0 <= dst < 256):
            raise LabelMappingError(f"mapped class {dst} out of uint8 range")
        lut[src] = dst
    new_labels = lut[grid.labels]
    new_count = int(max(mapping.values())) + 1
    world = WorldSpec(
        bounds_min=grid.world.bounds_min,
        bounds_max=grid.world.bounds_max,
        grid_dims=grid.world.grid_dims,
        voxel_size=grid.world.voxel_size,
        class_count=new_count,
    )
    return OccupancyGrid(world, new_labels)


# Desk-scale preset: 64x64x8 one-meter voxels, seven classes. Big enough to
# show structure, small enough to train in minutes.
DESK_CLASS_NAMES = (
    "free",
    "road",
    "sidewalk",
    "vehicle",
    "building",
    "vegetation",
    "pedestrian",
)

DESK_PALETTE = {
    0: (240, 240, 240),
    1: (217, 217, 217),
    2: (255, 52, 179),
    3: (255, 158, 0),
    4: (222, 184, 135),
    5: (84, 255, 159),
    6: (0, 0, 255),
}


def desk_world() -> WorldSpec:
    return WorldSpec(
        bounds_min=(-32.0, -32.0, 0.0),
        bounds_max=(32.0, 32.0, 8.0),
        grid_dims=(64, 64, 8),
        voxel_size=1.0,
        class_count=7,
        class_names=DESK_CLASS_NAMES,
        palette=dict(DESK_PALETTE),
    )


# Full-scale preset mirroring the common 17-class driving-occupancy labeling
# and its 11-class merge (car/bus/truck/trailer/construction -> vehicle, etc).
# Ids are assigned alphabetically after the mandatory free=0.
FULL17_CLASS_NAMES = (
    "free",
    "barrier",
    "bicycle",
    "bus",
    "car",
    "construction_vehicle",
    "driveable_surface",
    "manmade",
    "motorcycle",
    "other_flat",
    "pedestrian",
    "sidewalk",
    "terrain",
    "traffic_cone",
    "trailer",
    "truck",
    "vegetation",
)

MERGED11_CLASS_NAMES = (
    "free",
    "barrier",
    "bicycle",
    "building",
    "ground",
    "pedestrian",
    "pole",
    "road",
    "sidewalk",
    "vegetation",
    "vehicle",
)

MERGED11_PALETTE = {
    0: (240, 240, 240),
    1: (112, 128, 144),
    2: (220, 20, 60),
    3: (222, 184, 135),
    4: (23, 135, 31),
    5: (0, 0, 255),
    6: (153, 153, 153),
    7: (217, 217, 217),
    8: (255, 52, 179),
    9: (84, 255, 159),
    10: (255, 158, 0),
}

_MERGE_BY_NAME = {
    "free": "free",
    "barrier": "barrier",
    "bicycle": "bicycle",
    "motorcycle": "bicycle",
    "manmade": "building",
    "other_flat": "ground",
    "terrain": "ground",
    "pedestrian": "pedestrian",
    "traffic_cone": "pole",
    "driveable_surface": "road",
    "sidewalk": "sidewalk",
    "vegetation": "vegetation",
    "bus": "vehicle",
    "car": "vehicle",
    "construction_vehicle": "vehicle",
    "trailer": "vehicle",
    "truck": "vehicle",
}


def merge_17_to_11() -> dict[int, int]:
    """Class-id mapping from the 17-class labeling to the 11-class merge."""
    to_id = {name: i for i, name in enumerate(MERGED11_CLASS_NAMES)}
    return {
        src_id: to_id[_MERGE_BY_NAME[name]] for src_id, name in enumerate(FULL17_CLASS_NAMES)
    }


def full_scale_world() -> WorldSpec:
    return WorldSpec(
        bounds_min=(-50.0, -50.0, -2.0),
        bounds_max=(50.0, 50.0, 6.0),
        grid_dims=(200, 200, 16),
        voxel_size=0.5,
        class_count=17,
        class_names=FULL17_CLASS_NAMES,
        palette={i: (128, 128, 128) for i in range(17)},
    )
