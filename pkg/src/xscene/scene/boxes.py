"""Oriented 3D boxes, lane polylines, and the normalized box parameterization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .world import WorldSpec

LANE_POINT_COUNT = 16


class BoxDomainError(ValueError):
    """Raised when a box or normalized vector violates its domain."""


def wrap_angle(theta: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return float((theta + math.pi) % (2.0 * math.pi) - math.pi)


@dataclass(frozen=True)
class Box7:
    """Oriented box: center (m), dims (l, w, h) (m), yaw about +z in [-pi, pi)."""

    center: tuple[float, float, float]
    dims: tuple[float, float, float]
    yaw: float
    class_id: int
    instance_id: int = 0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (*self.center, *self.dims, self.yaw)):
            raise BoxDomainError("box fields must be finite")
        if min(self.dims) <= 0:
            raise BoxDomainError(f"box dims must be strictly positive, got {self.dims}")
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    def corners(self) -> np.ndarray:
        """(8, 3) world-space corner coordinates."""
        l, w, h = self.dims
        sx = np.array([-0.5, 0.5]) * l
        sy = np.array([-0.5, 0.5]) * w
        sz = np.array([-0.5, 0.5]) * h
        local = np.array([[x, y, z] for x in sx for y in sy for z in sz])
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return local @ rot.T + np.asarray(self.center)


@dataclass(frozen=True)
class LanePolyline:
    """Fixed-length 2D polyline in world coordinates (z implied by the road)."""

    points: np.ndarray
    lane_type: str = "lane"

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"lane points must be (N, 2), got {pts.shape}")
        if pts.shape[0] != LANE_POINT_COUNT:
            raise ValueError(
                f"lane must have {LANE_POINT_COUNT} points, got {pts.shape[0]}"
            )
        if not np.all(np.isfinite(pts)):
            raise ValueError("lane points must be finite")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)


def normalize_box(box: Box7, world: WorldSpec) -> np.ndarray:
    """8-vector (cx', cy', cz', log l, log w, log h, sin yaw, cos yaw).

    Centers are scaled to [0, 1] over the world bounds; a center outside the
    bounds is a domain error.
    """
    center = np.asarray(box.center, dtype=np.float64)
    lo = np.asarray(world.bounds_min, dtype=np.float64)
    hi = np.asarray(world.bounds_max, dtype=np.float64)
    if np.any(center < lo) or np.any(center > hi):
        raise BoxDomainError(f"box center {box.center} outside world bounds")
    unit = (center - lo) / (hi - lo)
    logs = np.log(np.asarray(box.dims, dtype=np.float64))
    return np.concatenate([unit, logs, [math.sin(box.yaw), math.cos(box.yaw)]])


def denormalize_box(
    vec: np.ndarray, world: WorldSpec, class_id: int = 0, instance_id: int = 0
) -> Box7:
    """Inverse of :func:`normalize_box`; yaw via atan2 of the renormalized pair."""
    v = np.asarray(vec, dtype=np.float64)
    if v.shape != (8,):
        raise BoxDomainError(f"expected an 8-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise BoxDomainError("normalized box vector must be finite")
    sin_c, cos_c = float(v[6]), float(v[7])
    norm = math.hypot(sin_c, cos_c)
    if norm == 0.0:
        raise BoxDomainError("(sin, cos) pair has zero norm; yaw undefined")
    lo = np.asarray(world.bounds_min, dtype=np.float64)
    hi = np.asarray(world.bounds_max, dtype=np.float64)
    center = lo + v[:3] * (hi - lo)
    dims = np.exp(v[3:6])
    yaw = math.atan2(sin_c / norm, cos_c / norm)
    return Box7(
        center=tuple(float(c) for c in center),
        dims=tuple(float(d) for d in dims),
        yaw=yaw,
        class_id=class_id,
        instance_id=instance_id,
    )
