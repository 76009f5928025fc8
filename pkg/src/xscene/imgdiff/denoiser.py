"""Multi-view image noise predictor.

Views share conv weights and couple through full self-attention over the
joint view-token sequence at the two coarsest resolutions; condition
tokens (text, camera, boxes, optionally relative pose) enter via per-view
cross-attention at the same depths. The fused geometric embedding is added
to the features right after the input convolution, and fixed coordinate
channels make per-pixel memorization possible.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from ..nnblocks import CrossAttention, FilmBlock, sinusoidal_time_embedding


class CrossViewAttention(nn.Module):
    """Self-attention over all views' spatial tokens jointly."""

    def __init__(self, channels: int, heads: int = 4):
        super().__init__()
        self.norm = nn.GroupNorm(1, channels)
        self.attn = nn.MultiheadAttention(channels, heads, batch_first=True)

    def forward(self, x: torch.Tensor, n_views: int) -> torch.Tensor:
        bv, c, h, w = x.shape
        b = bv // n_views
        tokens = self.norm(x).reshape(b, n_views * 1, c, h * w)
        tokens = tokens.permute(0, 1, 3, 2).reshape(b, n_views * h * w, c)
        out, _ = self.attn(tokens, tokens, tokens, need_weights=False)
        out = out.reshape(b, n_views, h * w, c).permute(0, 1, 3, 2)
        return x + out.reshape(bv, c, h, w)


@dataclass(frozen=True)
class ImgDenoiserConfig:
    height: int = 64
    width: int = 112
    views: int = 6
    in_channels: int = 3  # 10 for the extrapolation variant
    base: int = 12
    geo_channels: int = 12
    token_dim: int = 32
    time_dim: int = 64
    heads: int = 4


class ImgDenoiser(nn.Module):
    def __init__(self, config: ImgDenoiserConfig):
        super().__init__()
        self.config = config
        b = config.base
        ys = torch.linspace(-1, 1, config.height)
        xs = torch.linspace(-1, 1, config.width)
        gy, gx = torch.meshgrid(ys, xs, indexing="ij")
        self.register_buffer("coords", torch.stack([gy, gx])[None])
        self.time_mlp = nn.Sequential(
            nn.Linear(config.time_dim, config.time_dim), nn.SiLU(),
            nn.Linear(config.time_dim, config.time_dim),
        )
        self.in_conv = nn.Conv2d(config.in_channels + 2, b, 3, padding=1)
        self.geo_proj = nn.Conv2d(config.geo_channels, b, 1)
        self.enc1 = FilmBlock(b, b * 2, config.time_dim, stride=2)  # H/2
        self.enc2 = FilmBlock(b * 2, b * 2, config.time_dim, stride=2)  # H/4
        self.enc3 = FilmBlock(b * 2, b * 4, config.time_dim, stride=2)  # H/8
        self.view_attn3 = CrossViewAttention(b * 4, config.heads)
        self.cond_attn3 = CrossAttention(b * 4, config.token_dim)
        self.enc4 = FilmBlock(b * 4, b * 4, config.time_dim, stride=2)  # H/16
        self.view_attn4 = CrossViewAttention(b * 4, config.heads)
        self.cond_attn4 = CrossAttention(b * 4, config.token_dim)
        self.mid = FilmBlock(b * 4, b * 4, config.time_dim)
        self.up4 = nn.ConvTranspose2d(b * 4, b * 4, 2, stride=2)
        self.dec3 = FilmBlock(b * 8, b * 2, config.time_dim)
        self.up3 = nn.ConvTranspose2d(b * 2, b * 2, 2, stride=2)
        self.dec2 = FilmBlock(b * 4, b * 2, config.time_dim)
        self.up2 = nn.ConvTranspose2d(b * 2, b * 2, 2, stride=2)
        self.dec1 = FilmBlock(b * 4, b, config.time_dim)
        self.up1 = nn.ConvTranspose2d(b, b, 2, stride=2)
        # Full-resolution FiLM stage: the skip path from the input must be
        # time-gated or the denoiser cannot scale reference content by the
        # timestep-dependent factor the small-t regime needs.
        self.out_film = FilmBlock(b * 2, b, config.time_dim)
        self.out_conv = nn.Conv2d(b, 3, 3, padding=1)
        # Start at the zero prediction; residual learning converges faster.
        nn.init.zeros_(self.out_conv.weight)
        nn.init.zeros_(self.out_conv.bias)

    def forward(
        self,
        x: torch.Tensor,  # (B, V, C_in, H, W)
        t: torch.Tensor,  # (B,)
        e_geo: torch.Tensor,  # (B, V, geo_channels, H, W)
        tokens: torch.Tensor,  # (B, V, N, token_dim)
        token_mask: torch.Tensor | None = None,  # (B, V, N)
    ) -> torch.Tensor:
        bsz, views, c, h, w = x.shape
        cfg = self.config
        if (c, h, w) != (cfg.in_channels, cfg.height, cfg.width):
            raise ValueError(f"input shape {(c, h, w)} does not match config")
        if e_geo.shape[:2] != (bsz, views) or e_geo.shape[3:] != (h, w):
            raise ValueError("e_geo misaligned with the view batch")
        flat = x.reshape(bsz * views, c, h, w)
        flat = torch.cat([flat, self.coords.expand(bsz * views, -1, -1, -1)], dim=1)
        t_emb = self.time_mlp(sinusoidal_time_embedding(t, cfg.time_dim).to(x.dtype))
        t_flat = t_emb.repeat_interleave(views, dim=0)
        tok_flat = tokens.reshape(bsz * views, tokens.shape[2], -1)
        mask_flat = token_mask.reshape(bsz * views, -1) if token_mask is not None else None

        h0 = self.in_conv(flat) + self.geo_proj(e_geo.reshape(bsz * views, -1, h, w))
        h1 = self.enc1(h0, t_flat)
        h2 = self.enc2(h1, t_flat)
        h3 = self.enc3(h2, t_flat)
        h3 = self.view_attn3(h3, views)
        h3 = self.cond_attn3(h3, tok_flat, mask_flat)
        h4 = self.enc4(h3, t_flat)
        h4 = self.view_attn4(h4, views)
        h4 = self.cond_attn4(h4, tok_flat, mask_flat)
        h4 = self.mid(h4, t_flat)
        u3 = self.dec3(torch.cat([self.up4(h4), h3], dim=1), t_flat)
        u2 = self.dec2(torch.cat([self.up3(u3), h2], dim=1), t_flat)
        u1 = self.dec1(torch.cat([self.up2(u2), h1], dim=1), t_flat)
        u0 = self.out_film(torch.cat([self.up1(u1), h0], dim=1), t_flat)
        out = self.out_conv(u0)
        return out.reshape(bsz, views, 3, h, w)
