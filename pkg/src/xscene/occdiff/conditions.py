"""Conditioning inputs for latent occupancy diffusion.

Raw conditions are the layout (boxes + lanes), the scene description, and
the world. ``featurize`` turns them into plain tensors (cacheable, no
learned parameters); ``encode`` applies the learned encoders, producing the
additive spatial layout embedding and the cross-attention token sequence
(box tokens followed by one text token).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numpy as np
import torch
from torch import nn

from ..describe.clients import HashEmbedder
from ..describe.types import SceneDescription
from ..scene.boxes import Box7, LanePolyline, normalize_box
from ..scene.world import WorldSpec

BEV_FOREGROUND_CLASSES = (3, 6)  # vehicle, pedestrian in the desk palette


@dataclass
class RawConditions:
    world: WorldSpec
    boxes: list[Box7] = field(default_factory=list)
    lanes: list[LanePolyline] = field(default_factory=list)
    description: SceneDescription | None = None

    def text(self) -> str:
        return self.description.summary_text() if self.description else ""


def layout_bev_raster(
    boxes: list[Box7],
    lanes: list[LanePolyline],
    world: WorldSpec,
    class_ids: tuple[int, ...] = BEV_FOREGROUND_CLASSES,
) -> np.ndarray:
    """(len(class_ids)+1, X, Y) top-down raster: box footprints, then lanes."""
    gx, gy, _ = world.grid_dims
    channels = [np.zeros((gx, gy), dtype=np.float32) for _ in range(len(class_ids) + 1)]
    index = {c: i for i, c in enumerate(class_ids)}
    lo = np.asarray(world.bounds_min[:2])
    vs = world.voxel_size
    for box in boxes:
        if box.class_id not in index:
            continue
        corners = box.corners()[:4, :2]  # bottom face
        cells = (corners - lo) / vs
        # cv2 points are (col, row) = (y-cell, x-cell)
        pts = np.round(np.stack([cells[:, 1], cells[:, 0]], axis=1)).astype(np.int32)
        cv2.fillConvexPoly(channels[index[box.class_id]], cv2.convexHull(pts), 1.0)
    lane_ch = channels[-1]
    for lane in lanes:
        cells = (lane.points - lo) / vs
        pts = np.round(np.stack([cells[:, 1], cells[:, 0]], axis=1)).astype(np.int32)
        cv2.polylines(lane_ch, [pts], isClosed=False, color=1.0, thickness=1)
    return np.stack(channels, axis=0)


@dataclass
class CondFeatures:
    """Parameter-free featurization of raw conditions (cacheable)."""

    raster: torch.Tensor  # (C_raster, X, Y)
    box_inputs: torch.Tensor  # (N, class_count + 8)
    text_vec: torch.Tensor  # (text_dim,)


@dataclass
class ConditionBundle:
    """Computed embeddings: additive spatial map plus token sequence."""

    e_layout: torch.Tensor  # (C_latent, rows, cols), matches the packed map
    tokens: torch.Tensor  # (N_tokens, token_dim): box tokens + text token
    is_null: bool = False


@dataclass
class BatchedConditions:
    e_layout: torch.Tensor  # (B, C_latent, rows, cols)
    tokens: torch.Tensor  # (B, N_max, token_dim)
    token_mask: torch.Tensor  # (B, N_max) bool


def collate_bundles(bundles: list[ConditionBundle]) -> BatchedConditions:
    n_max = max(b.tokens.shape[0] for b in bundles)
    dim = bundles[0].tokens.shape[1]
    tokens = torch.zeros(len(bundles), n_max, dim, dtype=bundles[0].tokens.dtype)
    mask = torch.zeros(len(bundles), n_max, dtype=torch.bool)
    for i, b in enumerate(bundles):
        n = b.tokens.shape[0]
        tokens[i, :n] = b.tokens
        mask[i, :n] = True
    e_layout = torch.stack([b.e_layout for b in bundles])
    return BatchedConditions(e_layout=e_layout, tokens=tokens, token_mask=mask)


class ConditionEncoder(nn.Module):
    """E_layout (ConvNet), E_box (MLP), E_text (linear over hash features)."""

    def __init__(
        self,
        latent_channels: int,
        map_shape: tuple[int, int],
        token_dim: int = 32,
        raster_channels: int = len(BEV_FOREGROUND_CLASSES) + 1,
        box_class_count: int = 7,
        text_dim: int = 64,
        hidden: int = 32,
    ):
        super().__init__()
        self.map_shape = map_shape
        self.token_dim = token_dim
        self.box_class_count = box_class_count
        self.text_dim = text_dim
        self.enc_layout = nn.Sequential(
            nn.Conv2d(raster_channels, hidden, 3, padding=1),
            nn.SiLU(),
            nn.Conv2d(hidden, latent_channels, 3, padding=1),
        )
        self.enc_box = nn.Sequential(
            nn.Linear(box_class_count + 8, hidden), nn.SiLU(), nn.Linear(hidden, token_dim)
        )
        self.enc_text = nn.Linear(text_dim, token_dim)
        self.null_token = nn.Parameter(torch.zeros(1, token_dim))
        self.text_encoder = HashEmbedder(text_dim)

    def featurize(self, raw: RawConditions) -> CondFeatures:
        raster = layout_bev_raster(raw.boxes, raw.lanes, raw.world)
        box_inputs = torch.zeros(len(raw.boxes), self.box_class_count + 8)
        for i, box in enumerate(raw.boxes):
            box_inputs[i, box.class_id] = 1.0
            box_inputs[i, self.box_class_count :] = torch.from_numpy(
                normalize_box(box, raw.world)
            ).to(torch.float32)
        text_vec = torch.from_numpy(self.text_encoder.embed(raw.text())).to(torch.float32)
        return CondFeatures(
            raster=torch.from_numpy(raster), box_inputs=box_inputs, text_vec=text_vec
        )

    def encode(self, features: CondFeatures) -> ConditionBundle:
        feat = self.enc_layout(features.raster[None])
        e_layout = nn.functional.adaptive_avg_pool2d(feat, self.map_shape)[0]
        box_tokens = self.enc_box(features.box_inputs)
        text_token = self.enc_text(features.text_vec)[None]
        tokens = torch.cat([box_tokens, text_token], dim=0)
        return ConditionBundle(e_layout=e_layout, tokens=tokens, is_null=False)

    def forward(self, raw: RawConditions) -> ConditionBundle:
        return self.encode(self.featurize(raw))

    def null_bundle(self) -> ConditionBundle:
        rows, cols = self.map_shape
        e_layout = torch.zeros(
            self.enc_layout[-1].out_channels, rows, cols, dtype=self.null_token.dtype
        )
        return ConditionBundle(e_layout=e_layout, tokens=self.null_token, is_null=True)
