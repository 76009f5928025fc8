"""Pinhole cameras and perspective projection of layouts.

Extrinsics are world-to-camera: ``p_cam = R @ p_world + T`` with OpenCV axes
(x right, y down, z forward). Pixels: ``u = fx*x/z + cx``, ``v = fy*y/z + cy``.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .boxes import Box7, LanePolyline

DEFAULT_NEAR_PLANE = 0.1


@dataclass(frozen=True)
class Camera:
    intrinsics: tuple[float, float, float, float]  # fx, fy, cx, cy
    rotation: np.ndarray  # 3x3, world-to-camera
    translation: np.ndarray  # 3-vector, world-to-camera
    image_size: tuple[int, int]  # H, W

    def __post_init__(self):
        r = np.ascontiguousarray(self.rotation, dtype=np.float64)
        t = np.ascontiguousarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-6):
            raise ValueError("rotation must be orthonormal")
        if not np.isclose(np.linalg.det(r), 1.0, atol=1e-6):
            raise ValueError("rotation must be proper (det +1)")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def camera_to_pixel(self, cam_points: np.ndarray) -> np.ndarray:
        """Project camera-frame points; caller is responsible for z > 0."""
        pts = np.asarray(cam_points, dtype=np.float64)
        fx, fy, cx, cy = self.intrinsics
        z = pts[..., 2]
        u = fx * pts[..., 0] / z + cx
        v = fy * pts[..., 1] / z + cy
        return np.stack([u, v], axis=-1)

    def project(self, world_points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(pixels, depths) for world points; pixels are NaN behind the camera."""
        cam = self.world_to_camera(world_points)
        z = cam[..., 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            px = self.camera_to_pixel(cam)
        px = np.where(z[..., None] > 0, px, np.nan)
        return px, z

    @property
    def position(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation


def camera_looking(
    position: np.ndarray,
    yaw: float,
    intrinsics: tuple[float, float, float, float],
    image_size: tuple[int, int],
    pitch: float = 0.0,
) -> Camera:
    """Camera at ``position`` facing world yaw angle (0 = +x), z-up world."""
    cy, sy = np.cos(yaw), np.sin(yaw)
    forward = np.array([cy, sy, 0.0])
    forward = np.array(
        [forward[0] * np.cos(pitch), forward[1] * np.cos(pitch), np.sin(pitch)]
    )
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    down /= np.linalg.norm(down)
    # Rows of R are the camera axes expressed in world coordinates.
    r = np.stack([right, down, forward], axis=0)
    t = -r @ np.asarray(position, dtype=np.float64)
    return Camera(intrinsics=intrinsics, rotation=r, translation=t, image_size=image_size)


def _clip_segment_near(
    a: np.ndarray, b: np.ndarray, near: float
) -> tuple[np.ndarray, np.ndarray] | None:
    """Clip a camera-frame segment against z = near; None if fully behind."""
    za, zb = a[2], b[2]
    if za <= near and zb <= near:
        return None
    if za > near and zb > near:
        return a, b
    t = (near - za) / (zb - za)
    mid = a + t * (b - a)
    return (mid, b) if za <= near else (a, mid)


_BOX_EDGES = [
    (0, 1), (0, 2), (1, 3), (2, 3),
    (4, 5), (4, 6), (5, 7), (6, 7),
    (0, 4), (1, 5), (2, 6), (3, 7),
]


@dataclass(frozen=True)
class PerspectiveMap:
    """Multi-channel raster of a layout seen from one camera.

    Channels: one wireframe channel per entry of ``class_ids``, then one lane
    channel, then one depth-ordered fill channel (nearer boxes painted last).
    """

    data: np.ndarray  # H x W x C, float32 in [0, 1]
    class_ids: tuple[int, ...]

    @property
    def lane_channel(self) -> np.ndarray:
        return self.data[..., len(self.class_ids)]

    @property
    def fill_channel(self) -> np.ndarray:
        return self.data[..., len(self.class_ids) + 1]

    def class_channel(self, class_id: int) -> np.ndarray:
        return self.data[..., self.class_ids.index(class_id)]


def project_layout_to_perspective(
    boxes: list[Box7],
    lanes: list[LanePolyline],
    camera: Camera,
    class_ids: tuple[int, ...],
    lane_z: float = 0.0,
    near: float = DEFAULT_NEAR_PLANE,
) -> PerspectiveMap:
    """Rasterize box wireframes, lane polylines, and depth-ordered box fills."""
    h, w = camera.image_size
    n_cls = len(class_ids)
    channels = [np.zeros((h, w), dtype=np.float32) for _ in range(n_cls + 2)]
    cls_index = {c: i for i, c in enumerate(class_ids)}

    clip_lo, clip_hi = -8 * max(h, w), 8 * max(h, w)

    def draw_segment(channel: np.ndarray, a_cam: np.ndarray, b_cam: np.ndarray, value: float):
        clipped = _clip_segment_near(a_cam, b_cam, near)
        if clipped is None:
            return
        pa = camera.camera_to_pixel(clipped[0][None])[0]
        pb = camera.camera_to_pixel(clipped[1][None])[0]
        if not (np.all(np.isfinite(pa)) and np.all(np.isfinite(pb))):
            return
        pa = np.clip(pa, clip_lo, clip_hi)
        pb = np.clip(pb, clip_lo, clip_hi)
        cv2.line(
            channel,
            (int(round(pa[0])), int(round(pa[1]))),
            (int(round(pb[0])), int(round(pb[1]))),
            value,
            1,
        )

    # Wireframes per class channel.
    for box in boxes:
        if box.class_id not in cls_index:
            continue
        cam_corners = camera.world_to_camera(box.corners())
        channel = channels[cls_index[box.class_id]]
        for i, j in _BOX_EDGES:
            draw_segment(channel, cam_corners[i], cam_corners[j], 1.0)

    # Lane polylines in their own channel.
    lane_channel = channels[n_cls]
    for lane in lanes:
        pts3 = np.concatenate(
            [lane.points, np.full((len(lane.points), 1), lane_z)], axis=1
        )
        cam_pts = camera.world_to_camera(pts3)
        for i in range(len(cam_pts) - 1):
            draw_segment(lane_channel, cam_pts[i], cam_pts[i + 1], 1.0)

    # Depth-ordered fill: paint far-to-near so nearer boxes win overlaps.
    fill = channels[n_cls + 1]
    order = []
    for idx, box in enumerate(boxes):
        cam_corners = camera.world_to_camera(box.corners())
        visible = cam_corners[cam_corners[:, 2] > near]
        if len(visible) == 0:
            continue
        order.append((float(np.mean(visible[:, 2])), idx, cam_corners))
    for _, _, cam_corners in sorted(order, key=lambda item: -item[0]):
        visible = cam_corners[cam_corners[:, 2] > near]
        px = np.clip(camera.camera_to_pixel(visible), clip_lo, clip_hi)
        px_int = np.round(px).astype(np.int32)
        if len(px_int) < 3:
            continue
        hull = cv2.convexHull(px_int)
        cv2.fillConvexPoly(fill, hull, 1.0)

    return PerspectiveMap(data=np.stack(channels, axis=-1), class_ids=tuple(class_ids))
