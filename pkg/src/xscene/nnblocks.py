"""Small reusable network blocks shared by the denoisers."""

from __future__ import annotations

import math

import torch
from torch import nn


def sinusoidal_time_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """t: (B,) integer timesteps -> (B, dim) float32."""
    half = dim // 2
    freqs = torch.exp(
        torch.arange(half, dtype=torch.float64) * (-math.log(10000.0) / max(half - 1, 1))
    )
    angles = t[:, None].to(torch.float64) * freqs[None]
    emb = torch.cat([angles.sin(), angles.cos()], dim=1)
    return emb.to(torch.float32)


class FilmBlock(nn.Module):
    """Two convs with time-conditioned scale/shift and a residual skip."""

    def __init__(self, in_ch: int, out_ch: int, time_dim: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.time_proj = nn.Linear(time_dim, 2 * out_ch)
        self.act = nn.SiLU()
        self.skip = (
            nn.Conv2d(in_ch, out_ch, 1, stride=stride)
            if (in_ch != out_ch or stride != 1)
            else nn.Identity()
        )

    def forward(self, x, t_emb):
        h = self.act(self.conv1(x))
        scale, shift = self.time_proj(t_emb)[:, :, None, None].chunk(2, dim=1)
        h = self.conv2(h) * (1 + scale) + shift
        return self.act(h + self.skip(x))


class CrossAttention(nn.Module):
    """Spatial queries attend to a per-sample token sequence."""

    def __init__(self, channels: int, token_dim: int):
        super().__init__()
        self.q = nn.Conv2d(channels, channels, 1)
        self.k = nn.Linear(token_dim, channels)
        self.v = nn.Linear(token_dim, channels)
        self.out = nn.Conv2d(channels, channels, 1)
        self.scale = channels**-0.5

    def forward(self, x, tokens, token_mask=None):
        """x: (B, C, H, W); tokens: (B, N, D); token_mask: (B, N) bools."""
        b, c, h, w = x.shape
        q = self.q(x).reshape(b, c, h * w).permute(0, 2, 1)
        k = self.k(tokens)
        v = self.v(tokens)
        logits = q @ k.transpose(1, 2) * self.scale
        if token_mask is not None:
            logits = logits.masked_fill(~token_mask[:, None, :], float("-inf"))
        attn = torch.softmax(logits, dim=-1)
        out = (attn @ v).permute(0, 2, 1).reshape(b, c, h, w)
        return x + self.out(out)


class SelfAttention2d(nn.Module):
    """Full self-attention over flattened spatial (optionally grouped) tokens."""

    def __init__(self, channels: int):
        super().__init__()
        self.qkv = nn.Conv2d(channels, channels * 3, 1)
        self.out = nn.Conv2d(channels, channels, 1)
        self.scale = channels**-0.5

    def forward(self, x):
        b, c, h, w = x.shape
        q, k, v = self.qkv(x).reshape(b, 3, c, h * w).unbind(dim=1)
        attn = torch.softmax(q.transpose(1, 2) @ k * self.scale, dim=-1)
        out = (v @ attn.transpose(1, 2)).reshape(b, c, h, w)
        return x + self.out(out)
