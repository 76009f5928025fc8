"""Image generation model: conditioning encoders around the UNet."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from ..describe.clients import HashEmbedder
from ..render.embedding import GeoEmbeddingFuser, SceneCoordsEmbedder
from ..scene.boxes import Box7, normalize_box
from ..scene.cameras import Camera
from ..scene.world import WorldSpec
from .denoiser import ImgDenoiser, ImgDenoiserConfig

TEXT_DIM = 64
EXTRAP_EXTRA_CHANNELS = 7  # reference (3) + warped reference (3) + validity (1)


@dataclass
class MultiViewBatch:
    """One scene's views: images in [0, 1], one camera per view."""

    images: np.ndarray  # (V, H, W, 3)
    cameras: list[Camera]

    def __post_init__(self):
        if self.images.ndim != 4 or self.images.shape[0] != len(self.cameras):
            raise ValueError("images must be (V, H, W, 3) matching cameras")


def rotation_6d(r: np.ndarray) -> np.ndarray:
    """Continuous 6D rotation representation (first two columns)."""
    return np.concatenate([r[:, 0], r[:, 1]])


def relative_pose(cam_ref: Camera, cam_new: Camera) -> tuple[np.ndarray, np.ndarray]:
    """(R, T) mapping ref-camera coordinates to new-camera coordinates."""
    r_rel = cam_new.rotation @ cam_ref.rotation.T
    t_rel = cam_new.translation - r_rel @ cam_ref.translation
    return r_rel, t_rel


def fourier_vector(values: np.ndarray, bands: int = 4) -> torch.Tensor:
    """Fixed sin/cos features of a small vector."""
    vals = torch.tensor(values, dtype=torch.float32)
    feats = []
    for j in range(bands):
        freq = float(2**j)
        feats.append((vals * freq).sin())
        feats.append((vals * freq).cos())
    return torch.cat(feats)


@dataclass
class ImageConditions:
    """Per-scene conditioning: geometric rasters plus token inputs."""

    e_geo: torch.Tensor  # (V, geo_channels, H, W)
    tokens: torch.Tensor  # (V, N, token_dim)


class ImageModel(nn.Module):
    def __init__(self, config: ImgDenoiserConfig, class_count: int = 7,
                 perspective_channels: int = 4, box_class_count: int = 7):
        super().__init__()
        self.config = config
        self.unet = ImgDenoiser(config)
        self.fuser = GeoEmbeddingFuser(
            class_count=class_count,
            perspective_channels=perspective_channels,
            pos_token_dim=config.token_dim,
            out_channels=config.geo_channels,
            hidden=config.geo_channels,
        )
        self.coords_embedder = SceneCoordsEmbedder(token_dim=config.token_dim)
        self.text_encoder = HashEmbedder(TEXT_DIM)
        self.enc_text = nn.Linear(TEXT_DIM, config.token_dim)
        self.enc_camera = nn.Sequential(
            nn.Linear(9, 32), nn.SiLU(), nn.Linear(32, config.token_dim)
        )
        self.enc_box = nn.Sequential(
            nn.Linear(box_class_count + 8, 32), nn.SiLU(), nn.Linear(32, config.token_dim)
        )
        self.enc_pose = nn.Linear(9 * 8, config.token_dim)  # fourier(6d + t), 4 bands
        self.null_token = nn.Parameter(torch.zeros(1, config.token_dim))
        self.box_class_count = box_class_count

    # -- conditioning -------------------------------------------------------

    def build_conditions(
        self,
        semantic: np.ndarray,  # (V, H, W) class ids
        depth: np.ndarray,  # (V, H, W) with +inf holes
        perspective: np.ndarray,  # (V, C_persp, H, W)
        cameras: list[Camera],
        boxes: list[Box7],
        world: WorldSpec,
        text: str,
        rel_pose: tuple[np.ndarray, np.ndarray] | None = None,
    ) -> ImageConditions:
        views = len(cameras)
        disparity = np.zeros_like(depth)
        finite = np.isfinite(depth)
        disparity[finite] = 1.0 / np.maximum(depth[finite], 1e-6)
        pos_tokens = self.coords_embedder(world, boxes)[None].expand(views, -1, -1)
        e_geo = self.fuser(
            torch.from_numpy(semantic.astype(np.int64)),
            torch.from_numpy(disparity).to(torch.float32),
            torch.from_numpy(perspective).to(torch.float32),
            pos_tokens,
        )
        text_token = self.enc_text(
            torch.from_numpy(self.text_encoder.embed(text)).to(torch.float32)
        )
        box_tokens = []
        for box in boxes:
            onehot = torch.zeros(self.box_class_count)
            onehot[box.class_id] = 1.0
            params = torch.from_numpy(normalize_box(box, world)).to(torch.float32)
            box_tokens.append(self.enc_box(torch.cat([onehot, params])))
        per_view = []
        for cam in cameras:
            fx, fy, _, _ = cam.intrinsics
            cam_vec = np.concatenate(
                [rotation_6d(cam.rotation), cam.translation / 30.0]
            )
            cam_token = self.enc_camera(torch.tensor(cam_vec, dtype=torch.float32))
            toks = [text_token, cam_token, *box_tokens]
            if rel_pose is not None:
                r_rel, t_rel = rel_pose
                pose_vec = np.concatenate([rotation_6d(r_rel), t_rel / 30.0])
                toks.append(self.enc_pose(fourier_vector(pose_vec)))
            per_view.append(torch.stack(toks))
        return ImageConditions(e_geo=e_geo, tokens=torch.stack(per_view))

    def null_conditions(self, views: int) -> ImageConditions:
        cfg = self.config
        e_geo = torch.zeros(views, cfg.geo_channels, cfg.height, cfg.width)
        tokens = self.null_token[None].expand(views, -1, -1)
        return ImageConditions(e_geo=e_geo, tokens=tokens)

    # -- prediction -----------------------------------------------------------

    def predict_eps(
        self,
        x: torch.Tensor,  # (B, V, C_in, H, W)
        t: torch.Tensor,
        conditions: ImageConditions | list[ImageConditions],
        cfg_scale: float = 1.0,
    ) -> torch.Tensor:
        if isinstance(conditions, ImageConditions):
            conditions = [conditions] * x.shape[0]
        n_tokens = max(c.tokens.shape[1] for c in conditions)
        views = x.shape[1]
        e_geo = torch.stack([c.e_geo for c in conditions])
        tokens = torch.zeros(
            len(conditions), views, n_tokens, self.config.token_dim, dtype=x.dtype
        )
        mask = torch.zeros(len(conditions), views, n_tokens, dtype=torch.bool)
        for i, c in enumerate(conditions):
            n = c.tokens.shape[1]
            tokens[i, :, :n] = c.tokens
            mask[i, :, :n] = True
        eps_cond = self.unet(x, t, e_geo, tokens, mask)
        if cfg_scale == 1.0:
            return eps_cond
        null = self.null_conditions(views)
        null_geo = null.e_geo[None].expand(x.shape[0], -1, -1, -1, -1)
        null_tokens = null.tokens[None].expand(x.shape[0], -1, -1, -1)
        eps_null = self.unet(x, t, null_geo, null_tokens, None)
        return eps_null + cfg_scale * (eps_cond - eps_null)