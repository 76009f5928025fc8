"""Depth-based forward warping between camera views."""

from __future__ import annotations

import numpy as np

from ..scene.cameras import DEFAULT_NEAR_PLANE, Camera


def warp_reference(
    x_ref: np.ndarray,  # (H, W, 3)
    depth_ref: np.ndarray,  # (H, W), +inf where empty
    cam_ref: Camera,
    cam_new: Camera,
    near: float = DEFAULT_NEAR_PLANE,
) -> tuple[np.ndarray, np.ndarray]:
    """Scatter reference pixels into the new view via their depths.

    Nearest-neighbor splatting with a z-buffer on collisions; the validity
    mask is exactly the set of target pixels that received at least one
    source pixel.
    """
    h, w = depth_ref.shape
    fx, fy, cx, cy = cam_ref.intrinsics
    vs, us = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    finite = np.isfinite(depth_ref)
    z = depth_ref[finite]
    u = us[finite]
    v = vs[finite]
    rays = np.stack([(u - cx) / fx, (v - cy) / fy, np.ones_like(u)], axis=1)
    p_ref_cam = rays * z[:, None]
    p_world = (p_ref_cam - cam_ref.translation) @ cam_ref.rotation
    p_new_cam = p_world @ cam_new.rotation.T + cam_new.translation
    zn = p_new_cam[:, 2]
    keep = zn > near
    p_new_cam = p_new_cam[keep]
    colors = x_ref[finite][keep]
    zn = zn[keep]
    px = cam_new.camera_to_pixel(p_new_cam)
    ui = np.round(px[:, 0]).astype(np.int64)
    vi = np.round(px[:, 1]).astype(np.int64)
    h_new, w_new = cam_new.image_size
    inside = (ui >= 0) & (ui < w_new) & (vi >= 0) & (vi < h_new)
    ui, vi, zn, colors = ui[inside], vi[inside], zn[inside], colors[inside]

    warped = np.zeros((h_new, w_new, 3), dtype=np.float64)
    mask = np.zeros((h_new, w_new), dtype=np.float64)
    # Sort far-to-near: duplicate-index assignment keeps the last write, so
    # the nearest splat wins each contested pixel.
    order = np.argsort(-zn, kind="stable")
    ui, vi, colors = ui[order], vi[order], colors[order]
    warped[vi, ui] = colors
    mask[vi, ui] = 1.0
    return warped, mask
