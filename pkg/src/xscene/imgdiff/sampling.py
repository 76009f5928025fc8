"""View synthesis: plain conditional sampling and reference-conditioned
extrapolation."""

from __future__ import annotations

import numpy as np
import torch

from ..schedule import DiffusionSchedule
from ..scene.cameras import Camera
from .model import ImageConditions, ImageModel, MultiViewBatch, relative_pose
from .training import ExtrapPair, RenderedScene, extrapolation_inputs, scene_conditions


class MissingExtrapolationHead(RuntimeError):
    pass


def _sample_loop(
    model: ImageModel,
    conditions: ImageConditions,
    schedule: DiffusionSchedule,
    extra_channels: torch.Tensor | None,
    views: int,
    seed: int,
    steps: int | None,
    cfg_scale: float | None,
) -> np.ndarray:
    cfg = schedule.cfg_scale if cfg_scale is None else cfg_scale
    generator = torch.Generator().manual_seed(seed)
    h, w = model.config.height, model.config.width
    x = torch.randn((1, views, 3, h, w), generator=generator)

    def predict(x_t, t_scalar):
        x_in = x_t if extra_channels is None else torch.cat([x_t, extra_channels], dim=2)
        with torch.no_grad():
            return model.predict_eps(x_in, torch.tensor([t_scalar]), conditions, cfg)

    if steps is None or steps >= schedule.timesteps:
        for t_step in range(schedule.timesteps, 0, -1):
            eps = predict(x, t_step)
            z = torch.randn(x.shape, generator=generator)
            x = schedule.reverse_step(x, t_step, eps, z)
    else:
        times = schedule.strided_times(steps)
        for cur, nxt in zip(times, times[1:]):
            eps = predict(x, cur)
            x = schedule.ddim_step(x, cur, nxt, eps)
    images = ((x[0] + 1.0) / 2.0).clamp(0.0, 1.0)
    return images.permute(0, 2, 3, 1).numpy()


def sample_views(
    model: ImageModel,
    rendered: RenderedScene,
    schedule: DiffusionSchedule,
    seed: int,
    steps: int | None = 20,
    cfg_scale: float | None = None,
) -> MultiViewBatch:
    """Geometry-conditioned views for a rendered scene's rasters."""
    conditions = scene_conditions(model, rendered)
    images = _sample_loop(
        model, conditions, schedule, None, len(rendered.cameras), seed, steps, cfg_scale
    )
    return MultiViewBatch(images=images, cameras=list(rendered.cameras))


def extrapolate_views(
    model: ImageModel,
    pair: ExtrapPair,
    schedule: DiffusionSchedule,
    seed: int,
    steps: int | None = 20,
    cfg_scale: float | None = None,
) -> tuple[MultiViewBatch, np.ndarray]:
    """Views at the shifted rig conditioned on the reference views.

    Returns the batch plus the per-view warp validity masks (the overlap
    region useful for evaluation).
    """
    if model.config.in_channels != 10:
        raise MissingExtrapolationHead(
            "model lacks the reference-conditioned input channels"
        )
    stack, masks = extrapolation_inputs(pair)
    rel = relative_pose(pair.reference.cameras[0], pair.target.cameras[0])
    conditions = scene_conditions(model, pair.target, rel_pose=rel)
    extra = torch.from_numpy(stack)[None]
    images = _sample_loop(
        model, conditions, schedule, extra, len(pair.target.cameras), seed, steps, cfg_scale
    )
    return MultiViewBatch(images=images, cameras=list(pair.target.cameras)), masks


def psnr(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Peak signal-to-noise ratio in dB for [0, 1] images."""
    diff = (np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2
    if mask is not None:
        m = np.broadcast_to(mask[..., None], diff.shape).astype(bool)
        if not m.any():
            return float("inf")
        mse = diff[m].mean()
    else:
        mse = diff.mean()
    if mse <= 0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))
