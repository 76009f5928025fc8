"""Feature aggregation from triplanes with learned offsets and weights.

For a query q in the unit cube, each plane contributes a softmax-weighted
sum of K bilinear samples taken at the projected query position plus a
learned offset; the three plane contributions are summed:

    F(q) = sum_P sum_k softmax_k(W_w^P @ PE(q))_k * h^P(proj_P(q) + dp_k^P)
    dp_k^P = W_o^P[k] @ PE(q)

Offsets live in normalized plane coordinates; lookups use bilinear
interpolation with border clamping (align-corners indexing: cell i sits at
coordinate i / (A - 1)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .types import PLANE_AXES, PLANE_NAMES, DeformAttnParams, Triplane


def fourier_features(queries: torch.Tensor, dim: int, bands: int) -> torch.Tensor:
    """Positional encoding R^3 -> R^dim.

    Generates sin/cos pairs per axis over ``bands`` octave frequencies
    (ordered band-major, then axis, then sin/cos) and keeps the first
    ``dim`` columns, so every axis contributes at the low bands.
    """
    if queries.ndim != 2 or queries.shape[1] != 3:
        raise ValueError(f"queries must be (Q, 3), got {tuple(queries.shape)}")
    full = 6 * bands
    if dim > full:
        raise ValueError(f"dim {dim} exceeds {full} features from {bands} bands")
    feats = []
    for j in range(bands):
        freq = math.pi * (2.0**j)
        angle = queries * freq  # (Q, 3)
        pair = torch.stack([angle.sin(), angle.cos()], dim=-1)  # (Q, 3, 2)
        feats.append(pair.reshape(queries.shape[0], 6))
    return torch.cat(feats, dim=1)[:, :dim]


def bilinear_sample(plane: torch.Tensor, pos: torch.Tensor) -> torch.Tensor:
    """Sample (A, B, C) plane at normalized positions (Q, 2), border-clamped."""
    a, b, _ = plane.shape
    if a < 2 or b < 2:
        raise ValueError("planes must be at least 2x2 for bilinear sampling")
    u = (pos[:, 0] * (a - 1)).clamp(0.0, float(a - 1))
    v = (pos[:, 1] * (b - 1)).clamp(0.0, float(b - 1))
    u0 = u.floor().clamp(0, a - 2).to(torch.long)
    v0 = v.floor().clamp(0, b - 2).to(torch.long)
    wu = (u - u0).unsqueeze(-1)
    wv = (v - v0).unsqueeze(-1)
    p00 = plane[u0, v0]
    p01 = plane[u0, v0 + 1]
    p10 = plane[u0 + 1, v0]
    p11 = plane[u0 + 1, v0 + 1]
    top = p00 * (1 - wv) + p01 * wv
    bottom = p10 * (1 - wv) + p11 * wv
    return top * (1 - wu) + bottom * wu


@dataclass
class GatherDiagnostics:
    out_of_range_queries: int = 0
    clamped_samples: int = 0
    counts: dict = field(default_factory=dict)


def gather_features(
    planes: dict[str, torch.Tensor],
    w_weight: dict[str, torch.Tensor],
    w_offset: dict[str, torch.Tensor],
    queries: torch.Tensor,
    pe_dim: int,
    pe_bands: int,
) -> torch.Tensor:
    """Differentiable core; planes are (A, B, C), queries (Q, 3) in [0, 1]^3."""
    out = gather_features_batched(
        {name: planes[name].unsqueeze(0) for name in PLANE_NAMES},
        w_weight,
        w_offset,
        queries.unsqueeze(0),
        pe_dim,
        pe_bands,
    )
    return out[0]


def _bilinear_sample_batched(plane: torch.Tensor, pos: torch.Tensor) -> torch.Tensor:
    """plane (B, A, Bd, C), pos (B, Q, 2) normalized -> (B, Q, C)."""
    nb, a, b, c = plane.shape
    if a < 2 or b < 2:
        raise ValueError("planes must be at least 2x2 for bilinear sampling")
    u = (pos[..., 0] * (a - 1)).clamp(0.0, float(a - 1))
    v = (pos[..., 1] * (b - 1)).clamp(0.0, float(b - 1))
    u0 = u.floor().clamp(0, a - 2).to(torch.long)
    v0 = v.floor().clamp(0, b - 2).to(torch.long)
    wu = (u - u0).unsqueeze(-1)
    wv = (v - v0).unsqueeze(-1)
    flat = plane.reshape(nb * a * b, c)
    batch_off = (torch.arange(nb, device=plane.device) * (a * b)).view(nb, 1)

    def take(ui, vi):
        return flat[batch_off + ui * b + vi]

    top = take(u0, v0) * (1 - wv) + take(u0, v0 + 1) * wv
    bottom = take(u0 + 1, v0) * (1 - wv) + take(u0 + 1, v0 + 1) * wv
    return top * (1 - wu) + bottom * wu


def gather_features_batched(
    planes: dict[str, torch.Tensor],
    w_weight: dict[str, torch.Tensor],
    w_offset: dict[str, torch.Tensor],
    queries: torch.Tensor,
    pe_dim: int,
    pe_bands: int,
) -> torch.Tensor:
    """Batched core: planes (B, A, Bd, C), queries (B, Q, 3) -> (B, Q, C)."""
    nb, nq, _ = queries.shape
    pe = fourier_features(queries.reshape(-1, 3), pe_dim, pe_bands).reshape(nb, nq, -1)
    out = None
    for name in PLANE_NAMES:
        plane = planes[name]
        ww = w_weight[name]  # (K, D)
        wo = w_offset[name]  # (K, 2, D)
        k_points = ww.shape[0]
        weights = torch.softmax(pe @ ww.T, dim=-1)  # (B, Q, K)
        axes = PLANE_AXES[name]
        base = queries[..., list(axes)]  # (B, Q, 2)
        offsets = torch.einsum("bqd,ksd->bqks", pe, wo)  # (B, Q, K, 2)
        contrib = None
        for k in range(k_points):
            sample = _bilinear_sample_batched(plane, base + offsets[:, :, k])
            term = weights[..., k : k + 1] * sample
            contrib = term if contrib is None else contrib + term
        out = contrib if out is None else out + contrib
    return out


def deformable_gather(
    h: Triplane,
    params: DeformAttnParams,
    queries: np.ndarray,
    diagnostics: GatherDiagnostics | None = None,
    dtype: torch.dtype = torch.float64,
) -> np.ndarray:
    """Per-query feature C-vectors; out-of-cube queries are clamped and counted."""
    q = np.asarray(queries, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] != 3:
        raise ValueError(f"queries must be (Q, 3), got {q.shape}")
    outside = np.any((q < 0.0) | (q > 1.0), axis=1)
    if diagnostics is not None:
        diagnostics.out_of_range_queries += int(outside.sum())
    q = np.clip(q, 0.0, 1.0)
    planes = {
        name: torch.from_numpy(h.plane(name).copy()).to(dtype) for name in PLANE_NAMES
    }
    ww = {name: torch.from_numpy(params.w_weight[name]).to(dtype) for name in PLANE_NAMES}
    wo = {name: torch.from_numpy(params.w_offset[name]).to(dtype) for name in PLANE_NAMES}
    with torch.no_grad():
        out = gather_features(
            planes, ww, wo, torch.from_numpy(q).to(dtype), params.pe_dim, params.pe_bands
        )
    return out.numpy()
