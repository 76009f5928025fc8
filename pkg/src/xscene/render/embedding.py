"""Geometric conditioning for image diffusion: object position tokens and
the fused spatial embedding built from rendered semantic/depth/perspective
maps."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..scene.boxes import Box7
from ..scene.world import WorldSpec


class DegenerateBoxError(ValueError):
    pass


def box_coordinate_lattice(world: WorldSpec, box: Box7, side: int = 4) -> np.ndarray:
    """(side^3, 3) normalized scene coordinates sampled inside the box.

    The lattice is symmetric in the box frame, so its mean sits at the box
    center; coordinates are normalized by the world bounds to [0, 1].
    """
    if min(box.dims) < 1e-6:
        raise DegenerateBoxError(f"degenerate box dims {box.dims}")
    fractions = (np.arange(side) + 0.5) / side - 0.5
    gx, gy, gz = np.meshgrid(
        fractions * box.dims[0], fractions * box.dims[1], fractions * box.dims[2],
        indexing="ij",
    )
    local = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)
    c, s = np.cos(box.yaw), np.sin(box.yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    pts = local @ rot.T + np.asarray(box.center)
    lo = np.asarray(world.bounds_min)
    hi = np.asarray(world.bounds_max)
    if np.any(pts.mean(axis=0) < lo) or np.any(pts.mean(axis=0) > hi):
        raise DegenerateBoxError(f"box center {box.center} outside world")
    return (pts - lo) / (hi - lo)


class SceneCoordsEmbedder(nn.Module):
    """Per-box token: MLP over the normalized in-box lattice, mean-pooled."""

    def __init__(self, token_dim: int = 32, hidden: int = 64, lattice_side: int = 4):
        super().__init__()
        self.lattice_side = lattice_side
        self.mlp = nn.Sequential(
            nn.Linear(3, hidden), nn.SiLU(), nn.Linear(hidden, token_dim)
        )

    @property
    def token_dim(self) -> int:
        return self.mlp[-1].out_features

    def forward(self, world: WorldSpec, boxes: list[Box7]) -> torch.Tensor:
        """(len(boxes), token_dim); zero-length input gives (0, token_dim)."""
        if not boxes:
            return torch.zeros(0, self.token_dim)
        lattices = np.stack(
            [box_coordinate_lattice(world, b, self.lattice_side) for b in boxes]
        )
        pts = torch.from_numpy(lattices).to(torch.float32)
        return self.mlp(pts).mean(dim=1)


class GeoEmbeddingFuser(nn.Module):
    """semantic one-hot + disparity + perspective rasters -> e_geo.

    Three small convolutional encoders, summed, plus the pooled position
    token broadcast over space; output spatial dims follow the input (the
    denoiser consumes e_geo at its own latent resolution).
    """

    def __init__(
        self,
        class_count: int,
        perspective_channels: int,
        pos_token_dim: int = 32,
        out_channels: int = 16,
        hidden: int = 16,
    ):
        super().__init__()
        self.class_count = class_count
        self.enc_semantic = nn.Sequential(
            nn.Conv2d(class_count, hidden, 3, padding=1), nn.SiLU(),
            nn.Conv2d(hidden, out_channels, 3, padding=1),
        )
        self.enc_depth = nn.Sequential(
            nn.Conv2d(1, hidden, 3, padding=1), nn.SiLU(),
            nn.Conv2d(hidden, out_channels, 3, padding=1),
        )
        self.enc_perspective = nn.Sequential(
            nn.Conv2d(perspective_channels, hidden, 3, padding=1), nn.SiLU(),
            nn.Conv2d(hidden, out_channels, 3, padding=1),
        )
        self.pos_proj = nn.Linear(pos_token_dim, out_channels)
        self.out_channels = out_channels

    def forward(
        self,
        semantic: torch.Tensor,  # (B, H, W) int64 class ids
        disparity: torch.Tensor,  # (B, H, W)
        perspective: torch.Tensor,  # (B, C_persp, H, W)
        pos_tokens: torch.Tensor,  # (B, N, pos_token_dim); N may be 0
    ) -> torch.Tensor:
        if semantic.shape != disparity.shape:
            raise ValueError("semantic and disparity rasters must align")
        if perspective.shape[0] != semantic.shape[0] or perspective.shape[2:] != semantic.shape[1:]:
            raise ValueError("perspective raster misaligned with semantic raster")
        onehot = F.one_hot(semantic.long(), self.class_count).permute(0, 3, 1, 2).float()
        fused = (
            self.enc_semantic(onehot)
            + self.enc_depth(disparity.unsqueeze(1).float())
            + self.enc_perspective(perspective.float())
        )
        if pos_tokens.shape[1] > 0:
            pooled = self.pos_proj(pos_tokens.float().mean(dim=1))
            fused = fused + pooled[:, :, None, None]
        return fused
