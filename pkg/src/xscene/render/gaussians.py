"""Voxel-to-Gaussian conversion and semantic/depth rasterization.

Primitives are isotropic Gaussians with a hard footprint at two standard
deviations. Rasterization composites front-to-back with alpha from the
Gaussian falloff times opacity; per-pixel semantics accumulate class mass
and depth accumulates the alpha-weighted expectation. Pixels nothing hits
carry class 0 ("free") and depth +inf.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..scene.cameras import DEFAULT_NEAR_PLANE, Camera
from ..scene.world import OccupancyGrid

MIN_COVERAGE = 1e-6


@dataclass(frozen=True)
class GaussianPrimitiveSet:
    centers: np.ndarray  # (N, 3) world meters
    scales: np.ndarray  # (N,) isotropic sigma, meters
    classes: np.ndarray  # (N,) semantic class ids
    opacities: np.ndarray  # (N,) in (0, 1]

    def __post_init__(self):
        n = self.centers.shape[0]
        if self.centers.shape != (n, 3):
            raise ValueError("centers must be (N, 3)")
        for name in ("scales", "classes", "opacities"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must be (N,)")
        if n and (self.opacities.min() <= 0 or self.opacities.max() > 1):
            raise ValueError("opacities must lie in (0, 1]")

    def __len__(self) -> int:
        return self.centers.shape[0]


def voxels_to_gaussians(
    occ: OccupancyGrid, opacity: float | dict[int, float] = 1.0
) -> GaussianPrimitiveSet:
    """One primitive per occupied voxel, centered in the voxel, sigma = size/2."""
    idx = np.argwhere(occ.labels != 0)
    lo = np.asarray(occ.world.bounds_min, dtype=np.float64)
    centers = lo + (idx + 0.5) * occ.world.voxel_size
    classes = occ.labels[idx[:, 0], idx[:, 1], idx[:, 2]].astype(np.int32)
    scales = np.full(len(idx), occ.world.voxel_size / 2.0)
    if isinstance(opacity, dict):
        opacities = np.array([opacity.get(int(c), 1.0) for c in classes])
    else:
        opacities = np.full(len(idx), float(opacity))
    return GaussianPrimitiveSet(
        centers=centers, scales=scales, classes=classes, opacities=opacities
    )


def rasterize(
    prims: GaussianPrimitiveSet,
    camera: Camera,
    class_count: int | None = None,
    near: float = DEFAULT_NEAR_PLANE,
) -> tuple[np.ndarray, np.ndarray]:
    """(semantic H x W int32, depth H x W float64 with +inf where empty)."""
    h, w = camera.image_size
    n_classes = class_count or (int(prims.classes.max()) + 1 if len(prims) else 1)
    class_mass = np.zeros((h, w, n_classes), dtype=np.float64)
    depth_mass = np.zeros((h, w), dtype=np.float64)
    coverage = np.zeros((h, w), dtype=np.float64)
    transmittance = np.ones((h, w), dtype=np.float64)

    if len(prims):
        cam_pts = camera.world_to_camera(prims.centers)
        z = cam_pts[:, 2]
        keep = z > near
        order_keys = np.lexsort(
            (
                prims.classes[keep],
                cam_pts[keep, 1],
                cam_pts[keep, 0],
                z[keep],
            )
        )
        kept = np.flatnonzero(keep)[order_keys]
        fx = camera.intrinsics[0]
        px = camera.camera_to_pixel(cam_pts)

        for i in kept:
            zi = z[i]
            sigma_pix = prims.scales[i] * fx / zi
            radius = 2.0 * sigma_pix
            u, v = px[i]
            x0 = max(int(np.floor(u - radius)), 0)
            x1 = min(int(np.ceil(u + radius)) + 1, w)
            y0 = max(int(np.floor(v - radius)), 0)
            y1 = min(int(np.ceil(v + radius)) + 1, h)
            if x0 >= x1 or y0 >= y1:
                continue
            xs = np.arange(x0, x1, dtype=np.float64)
            ys = np.arange(y0, y1, dtype=np.float64)
            r2 = (xs[None, :] - u) ** 2 + (ys[:, None] - v) ** 2
            footprint = r2 <= radius * radius
            if not footprint.any():
                continue
            alpha = np.where(
                footprint,
                prims.opacities[i] * np.exp(-r2 / (2.0 * sigma_pix * sigma_pix)),
                0.0,
            )
            t_patch = transmittance[y0:y1, x0:x1]
            weight = t_patch * alpha
            class_mass[y0:y1, x0:x1, prims.classes[i]] += weight
            depth_mass[y0:y1, x0:x1] += weight * zi
            coverage[y0:y1, x0:x1] += weight
            transmittance[y0:y1, x0:x1] = t_patch * (1.0 - alpha)

    # Residual transmittance competes as free-space mass, so faint splat
    # halos around silhouettes stay background instead of bleeding outward.
    hit = coverage > MIN_COVERAGE
    class_mass[..., 0] = transmittance
    semantic = np.argmax(class_mass, axis=-1).astype(np.int32)
    semantic[~hit] = 0
    depth = np.full((h, w), np.inf)
    depth[hit] = depth_mass[hit] / coverage[hit]
    return semantic, depth


def depth_to_disparity(depth: np.ndarray) -> np.ndarray:
    """Empty (+inf) pixels become 0 disparity."""
    disp = np.zeros_like(depth)
    finite = np.isfinite(depth)
    disp[finite] = 1.0 / np.maximum(depth[finite], 1e-6)
    return disp
