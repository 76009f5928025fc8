"""Triplane <-> square-map packing and outpainting chunk masks.

Packed layout for planes (X_h x Y_h), (X_h x Z_h), (Y_h x Z_h):

    rows 0..X_h   | xy plane            | xz plane (cols Y_h..Y_h+Z_h)
    rows X_h..+Z_h| yz plane, transposed| zero corner (Z_h x Z_h)

The corner block is identically zero; a nonzero corner on unpack signals
corruption.
"""

from __future__ import annotations

import numpy as np

from ..triplane.types import Triplane

CORNER_ATOL = 0.0  # the corner is exactly zero by construction


class PackingError(ValueError):
    pass


def packed_shape(x_h: int, y_h: int, z_h: int, channels: int) -> tuple[int, int, int]:
    return (x_h + z_h, y_h + z_h, channels)


def pack_triplane(h: Triplane) -> np.ndarray:
    """(X_h+Z_h, Y_h+Z_h, C) float32 with the corner zero block."""
    x_h, y_h, z_h, c = h.dims
    out = np.zeros(packed_shape(x_h, y_h, z_h, c), dtype=np.float32)
    out[:x_h, :y_h] = h.h_xy
    out[:x_h, y_h:] = h.h_xz
    out[x_h:, :y_h] = np.transpose(h.h_yz, (1, 0, 2))
    return out


def unpack_triplane(packed: np.ndarray, x_h: int, y_h: int, z_h: int) -> Triplane:
    expected = packed_shape(x_h, y_h, z_h, packed.shape[2] if packed.ndim == 3 else 0)
    if packed.ndim != 3 or packed.shape != expected:
        raise PackingError(f"packed map shape {packed.shape} != expected {expected}")
    corner = packed[x_h:, y_h:]
    if np.abs(corner).max(initial=0.0) > CORNER_ATOL:
        raise PackingError("corner block is nonzero; packed map is corrupted")
    return Triplane(
        h_xy=packed[:x_h, :y_h],
        h_xz=packed[:x_h, y_h:],
        h_yz=np.transpose(packed[x_h:, :y_h], (1, 0, 2)),
    )


def zero_corner(packed: np.ndarray, x_h: int, y_h: int) -> np.ndarray:
    out = packed.copy()
    out[x_h:, y_h:] = 0.0
    return out


DIRECTIONS = ("+x", "-x", "+y", "-y")


def plan_chunk_masks(
    direction: str, overlap_fraction: float, x_h: int, y_h: int, z_h: int
) -> np.ndarray:
    """(X_h+Z_h, Y_h+Z_h) float mask: 1 marks the band shared with the reference.

    Extending toward +x means the new chunk's low-x band repeats the
    reference's high-x content, so the xy and xz rows covering that band
    are masked; the yz plane has no x axis and stays unmasked (same logic
    transposed for +-y). The zero corner is never masked.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    if not 0.0 < overlap_fraction < 1.0:
        raise ValueError("overlap_fraction must lie in (0, 1)")
    rows, cols = x_h + z_h, y_h + z_h
    mask = np.zeros((rows, cols), dtype=np.float32)
    if direction in ("+x", "-x"):
        band = int(round(x_h * overlap_fraction))
        rows_sel = slice(0, band) if direction == "+x" else slice(x_h - band, x_h)
        mask[rows_sel, :y_h] = 1.0  # xy plane rows
        mask[rows_sel, y_h:] = 1.0  # xz plane rows
    else:
        band = int(round(y_h * overlap_fraction))
        cols_sel = slice(0, band) if direction == "+y" else slice(y_h - band, y_h)
        mask[:x_h, cols_sel] = 1.0  # xy plane columns
        mask[x_h:, cols_sel] = 1.0  # yz plane (transposed: rows are z, cols are y)
    mask[x_h:, y_h:] = 0.0
    return mask


def shift_reference(h_ref: Triplane, direction: str, overlap_fraction: float) -> Triplane:
    """Reference latents re-expressed in the new chunk's frame.

    The overlap band of the new chunk equals the trailing band of the
    reference; content outside the band is zero (and masked out anyway).
    The yz plane aggregates over the shifted axis, so it carries over
    unchanged purely as an initialization.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    x_h, y_h, z_h, c = h_ref.dims
    xy = np.zeros_like(h_ref.h_xy)
    if direction in ("+x", "-x"):
        xz = np.zeros_like(h_ref.h_xz)
        yz = h_ref.h_yz.copy()  # no x axis; kept as initialization only
        band = int(round(x_h * overlap_fraction))
        if direction == "+x":
            xy[:band] = h_ref.h_xy[x_h - band :]
            xz[:band] = h_ref.h_xz[x_h - band :]
        else:
            xy[x_h - band :] = h_ref.h_xy[:band]
            xz[x_h - band :] = h_ref.h_xz[:band]
    else:
        xz = h_ref.h_xz.copy()  # no y axis; kept as initialization only
        yz = np.zeros_like(h_ref.h_yz)
        band = int(round(y_h * overlap_fraction))
        if direction == "+y":
            xy[:, :band] = h_ref.h_xy[:, y_h - band :]
            yz[:band] = h_ref.h_yz[y_h - band :]
        else:
            xy[:, y_h - band :] = h_ref.h_xy[:, :band]
            yz[y_h - band :] = h_ref.h_yz[:band]
    return Triplane(h_xy=xy, h_xz=xz, h_yz=yz)
