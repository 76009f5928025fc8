"""2D evaluation protocol: render occupancy through the fixed camera ring
with consistent palette colors."""

from __future__ import annotations

import numpy as np

from ..render.gaussians import rasterize, voxels_to_gaussians
from ..scene.cameras import Camera
from ..scene.world import OccupancyGrid
from ..toydata import camera_rig


def protocol_cameras() -> list[Camera]:
    """The documented six-camera ring used for occupancy evaluation."""
    return camera_rig()


def render_occ_to_2d(
    occ: OccupancyGrid,
    palette: dict[int, tuple[int, int, int]] | None = None,
    cameras: list[Camera] | None = None,
) -> list[np.ndarray]:
    """One uint8 (H, W, 3) image per camera; byte-stable across runs."""
    palette = palette or occ.world.palette
    cameras = cameras or protocol_cameras()
    prims = voxels_to_gaussians(occ)
    images = []
    for cam in cameras:
        semantic, _ = rasterize(prims, cam, class_count=occ.world.class_count)
        h, w = semantic.shape
        img = np.zeros((h, w, 3), dtype=np.uint8)
        for cls, rgb in palette.items():
            img[semantic == cls] = rgb
        images.append(img)
    return images


def palette_class_histogram(
    image: np.ndarray, palette: dict[int, tuple[int, int, int]]
) -> np.ndarray:
    """Class-probability row via nearest-palette-color pixel classification.

    image: (H, W, 3) floats in [0, 1] or uint8.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.max() > 1.5:
        img = img / 255.0
    classes = sorted(palette)
    colors = np.array([palette[c] for c in classes], dtype=np.float64) / 255.0
    d2 = ((img[:, :, None, :] - colors[None, None, :, :]) ** 2).sum(axis=-1)
    nearest = np.argmin(d2, axis=-1)
    counts = np.bincount(nearest.reshape(-1), minlength=len(classes)).astype(np.float64)
    return counts / counts.sum()


def occupancy_class_histogram(grid: OccupancyGrid) -> np.ndarray:
    """Class-probability row from the voxel label histogram."""
    counts = np.bincount(
        grid.labels.reshape(-1), minlength=grid.world.class_count
    ).astype(np.float64)
    return counts / counts.sum()
