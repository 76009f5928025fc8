"""Triplane latents and deformable-gather parameters."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..scene.io import dump_json, load_json

PLANE_NAMES = ("xy", "xz", "yz")

# Which query axes each plane projects onto: proj_xy(q) = (qx, qy), etc.
PLANE_AXES = {"xy": (0, 1), "xz": (0, 2), "yz": (1, 2)}


@dataclass(frozen=True)
class Triplane:
    """Three orthogonal latent planes, channels last: (A, B, C)."""

    h_xy: np.ndarray  # X_h x Y_h x C
    h_xz: np.ndarray  # X_h x Z_h x C
    h_yz: np.ndarray  # Y_h x Z_h x C

    def __post_init__(self):
        planes = {}
        channels = None
        for name in PLANE_NAMES:
            arr = np.ascontiguousarray(getattr(self, f"h_{name}"), dtype=np.float32)
            if arr.ndim != 3:
                raise ValueError(f"plane {name} must be (A, B, C), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"plane {name} contains non-finite values")
            if channels is None:
                channels = arr.shape[2]
            elif arr.shape[2] != channels:
                raise ValueError("planes must share one channel count")
            arr.flags.writeable = False
            planes[name] = arr
        if self.h_xy.shape[0] != self.h_xz.shape[0]:
            raise ValueError("h_xy and h_xz must agree on X_h")
        if self.h_xy.shape[1] != self.h_yz.shape[0]:
            raise ValueError("h_xy and h_yz must agree on Y_h")
        if self.h_xz.shape[1] != self.h_yz.shape[1]:
            raise ValueError("h_xz and h_yz must agree on Z_h")
        for name in PLANE_NAMES:
            object.__setattr__(self, f"h_{name}", planes[name])

    @property
    def dims(self) -> tuple[int, int, int, int]:
        """(X_h, Y_h, Z_h, C)."""
        return (
            self.h_xy.shape[0],
            self.h_xy.shape[1],
            self.h_xz.shape[1],
            self.h_xy.shape[2],
        )

    def plane(self, name: str) -> np.ndarray:
        return getattr(self, f"h_{name}")

    @classmethod
    def zeros(cls, x_h: int, y_h: int, z_h: int, channels: int) -> "Triplane":
        return cls(
            h_xy=np.zeros((x_h, y_h, channels), dtype=np.float32),
            h_xz=np.zeros((x_h, z_h, channels), dtype=np.float32),
            h_yz=np.zeros((y_h, z_h, channels), dtype=np.float32),
        )

    def save(self, directory: Path | str) -> None:
        """Three raw float32 arrays plus a JSON manifest."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        shapes = {}
        for name in PLANE_NAMES:
            arr = self.plane(name)
            (directory / f"h_{name}.f32").write_bytes(arr.tobytes())
            shapes[name] = list(arr.shape)
        dump_json(
            {"schema": "triplane/1", "dtype": "float32", "shapes": shapes},
            directory / "triplane.json",
        )

    @classmethod
    def load(cls, directory: Path | str) -> "Triplane":
        directory = Path(directory)
        manifest = load_json(directory / "triplane.json")
        planes = {}
        for name in PLANE_NAMES:
            shape = tuple(manifest["shapes"][name])
            raw = np.frombuffer((directory / f"h_{name}.f32").read_bytes(), dtype=np.float32)
            planes[f"h_{name}"] = raw.reshape(shape).copy()
        return cls(**planes)


@dataclass(frozen=True)
class DeformAttnParams:
    """Per-plane gather parameters: K sampling points, weight and offset nets.

    ``w_weight[p]`` is (K, D): attention logits from the positional encoding.
    ``w_offset[p]`` is (K, 2, D): K stacked 2xD matrices producing 2D offsets
    in normalized plane coordinates.
    """

    k_points: int
    pe_dim: int
    pe_bands: int
    w_weight: dict[str, np.ndarray]
    w_offset: dict[str, np.ndarray]

    def __post_init__(self):
        if self.k_points < 1:
            raise ValueError("k_points must be >= 1")
        for name in PLANE_NAMES:
            ww = np.asarray(self.w_weight[name], dtype=np.float64)
            wo = np.asarray(self.w_offset[name], dtype=np.float64)
            if ww.shape != (self.k_points, self.pe_dim):
                raise ValueError(f"w_weight[{name}] must be (K, D), got {ww.shape}")
            if wo.shape != (self.k_points, 2, self.pe_dim):
                raise ValueError(f"w_offset[{name}] must be (K, 2, D), got {wo.shape}")

    @classmethod
    def random(
        cls, k_points: int, pe_dim: int, pe_bands: int, rng: np.random.Generator,
        weight_scale: float = 0.5, offset_scale: float = 0.02,
    ) -> "DeformAttnParams":
        return cls(
            k_points=k_points,
            pe_dim=pe_dim,
            pe_bands=pe_bands,
            w_weight={
                p: rng.normal(0, weight_scale, (k_points, pe_dim)) for p in PLANE_NAMES
            },
            w_offset={
                p: rng.normal(0, offset_scale, (k_points, 2, pe_dim)) for p in PLANE_NAMES
            },
        )
