"""Raster dumps: palette-indexed semantic PNG and 16-bit disparity PNG.

Disparity is stored as ``round(disparity * DISPARITY_SCALE)`` clamped to
uint16; empty pixels (infinite depth) are 0.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

DISPARITY_SCALE = 8192.0


def write_semantic_png(semantic: np.ndarray, palette: dict[int, tuple[int, int, int]], path: Path | str) -> None:
    img = Image.fromarray(semantic.astype(np.uint8), mode="P")
    flat = [0] * 768
    for cls, (r, g, b) in palette.items():
        flat[3 * cls : 3 * cls + 3] = [r, g, b]
    img.putpalette(flat)
    img.save(path)


def read_semantic_png(path: Path | str) -> np.ndarray:
    return np.array(Image.open(path)).astype(np.int32)


def write_disparity_png(depth: np.ndarray, path: Path | str) -> None:
    disp = np.zeros_like(depth, dtype=np.float64)
    finite = np.isfinite(depth)
    disp[finite] = 1.0 / np.maximum(depth[finite], 1e-6)
    encoded = np.clip(np.round(disp * DISPARITY_SCALE), 0, 65535).astype(np.uint16)
    Image.fromarray(encoded).save(path)


def read_disparity_png(path: Path | str) -> np.ndarray:
    encoded = np.array(Image.open(path)).astype(np.float64)
    return encoded / DISPARITY_SCALE


def write_rgb_png(image: np.ndarray, path: Path | str) -> None:
    """image: (H, W, 3) float in [0, 1]."""
    Image.fromarray((np.clip(image, 0, 1) * 255).round().astype(np.uint8)).save(path)


def read_rgb_png(path: Path | str) -> np.ndarray:
    return np.array(Image.open(path).convert("RGB")).astype(np.float64) / 255.0
