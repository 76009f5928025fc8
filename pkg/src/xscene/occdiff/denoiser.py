"""Noise predictor over packed triplane maps.

A compact conv U-Net: additive layout conditioning at the input, FiLM time
modulation in every block, one downsampling level, and cross-attention to
the condition tokens at the coarse resolution. Fixed coordinate channels
give the network plane-position awareness inside the packed map.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from ..nnblocks import CrossAttention, FilmBlock, sinusoidal_time_embedding
from .conditions import BatchedConditions, ConditionBundle, ConditionEncoder, collate_bundles


@dataclass(frozen=True)
class OccDenoiserConfig:
    map_rows: int = 40
    map_cols: int = 40
    channels: int = 8
    base: int = 32
    time_dim: int = 64
    token_dim: int = 32
    box_class_count: int = 7


class OccDenoiser(nn.Module):
    def __init__(self, config: OccDenoiserConfig):
        super().__init__()
        self.config = config
        c, base = config.channels, config.base
        self.conditions = ConditionEncoder(
            latent_channels=c,
            map_shape=(config.map_rows, config.map_cols),
            token_dim=config.token_dim,
            box_class_count=config.box_class_count,
        )
        rows = torch.linspace(-1, 1, config.map_rows)
        cols = torch.linspace(-1, 1, config.map_cols)
        gr, gc = torch.meshgrid(rows, cols, indexing="ij")
        self.register_buffer("coords", torch.stack([gr, gc])[None])
        self.time_mlp = nn.Sequential(
            nn.Linear(config.time_dim, config.time_dim), nn.SiLU(),
            nn.Linear(config.time_dim, config.time_dim),
        )
        self.in_conv = nn.Conv2d(c + 2, base, 3, padding=1)
        self.down = FilmBlock(base, base * 2, config.time_dim, stride=2)
        self.mid = FilmBlock(base * 2, base * 2, config.time_dim)
        self.attn = CrossAttention(base * 2, config.token_dim)
        self.up = nn.ConvTranspose2d(base * 2, base, 2, stride=2)
        self.fuse = FilmBlock(base * 2, base, config.time_dim)
        self.out_conv = nn.Conv2d(base, c, 3, padding=1)

    def forward(
        self,
        h_t: torch.Tensor,
        t: torch.Tensor,
        conditions: ConditionBundle | BatchedConditions,
    ) -> torch.Tensor:
        """h_t: (B, C, rows, cols); t: (B,) ints; returns predicted noise."""
        if h_t.shape[1:] != (
            self.config.channels,
            self.config.map_rows,
            self.config.map_cols,
        ):
            raise ValueError(
                f"packed map shape {tuple(h_t.shape[1:])} does not match config"
            )
        b = h_t.shape[0]
        if isinstance(conditions, ConditionBundle):
            e_layout = conditions.e_layout[None]
            tokens = conditions.tokens[None].expand(b, -1, -1)
            token_mask = None
        else:
            e_layout = conditions.e_layout
            tokens = conditions.tokens
            token_mask = conditions.token_mask
        t_emb = self.time_mlp(
            sinusoidal_time_embedding(t, self.config.time_dim).to(h_t.dtype)
        )
        x = h_t + e_layout
        x = torch.cat([x, self.coords.expand(b, -1, -1, -1)], dim=1)
        x0 = self.in_conv(x)
        x1 = self.down(x0, t_emb)
        x1 = self.mid(x1, t_emb)
        x1 = self.attn(x1, tokens, token_mask)
        x2 = self.up(x1)
        x2 = self.fuse(torch.cat([x2, x0], dim=1), t_emb)
        return self.out_conv(x2)


def occ_denoise_step(
    model: OccDenoiser,
    h_t: torch.Tensor,
    t: torch.Tensor,
    bundle: ConditionBundle,
    cfg_scale: float = 1.0,
) -> torch.Tensor:
    """Classifier-free-guided noise prediction.

    cfg_scale == 1 returns the conditional prediction exactly; otherwise
    eps = eps_null + s * (eps_cond - eps_null) with the learned null bundle.
    """
    eps_cond = model(h_t, t, bundle)
    if cfg_scale == 1.0:
        return eps_cond
    eps_null = model(h_t, t, model.conditions.null_bundle())
    return eps_null + cfg_scale * (eps_cond - eps_null)
