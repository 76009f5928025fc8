"""Latent sampling: plain generation and reference-synchronized outpainting.

Both run the same masked loop; plain generation is the vacuous-mask,
no-resampling case, so seeded equivalence between the two is structural.
At every step the known region is the forward-diffused reference at the
current noise level and the unknown region is the ancestral reverse-step
sample; the packed corner is re-zeroed throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from ..schedule import DiffusionSchedule, repaint_time_sequence
from ..triplane.types import Triplane
from .conditions import ConditionBundle
from .denoiser import OccDenoiser, occ_denoise_step
from .packing import pack_triplane, unpack_triplane


@dataclass
class ResampleSpec:
    n_resample: int = 5
    jump: int = 20


def _masked_loop(
    model: OccDenoiser,
    bundle: ConditionBundle,
    schedule: DiffusionSchedule,
    mask: torch.Tensor,  # (rows, cols) in {0, 1}
    reference: torch.Tensor,  # (C, rows, cols), scaled packed latents
    valid: torch.Tensor,  # (rows, cols) validity (zero corner excluded)
    resample: ResampleSpec,
    generator: torch.Generator,
    cfg_scale: float,
    on_step=None,
) -> torch.Tensor:
    c = reference.shape[0]
    rows, cols = mask.shape
    dtype = reference.dtype
    m = (mask[None] * valid[None]).to(dtype)
    v = valid[None].to(dtype)
    reference = reference.to(dtype)
    x = torch.randn((c, rows, cols), generator=generator, dtype=dtype) * v
    if resample.n_resample > 1:
        seq = repaint_time_sequence(schedule.timesteps, resample.jump, resample.n_resample)
    else:
        seq = list(range(schedule.timesteps, -1, -1))
    for cur, nxt in zip(seq, seq[1:]):
        if nxt == cur - 1:
            t = cur
            with torch.no_grad():
                eps_hat = occ_denoise_step(
                    model, x[None], torch.tensor([t]), bundle, cfg_scale
                )[0]
            known_noise = torch.randn(x.shape, generator=generator, dtype=dtype)
            step_noise = torch.randn(x.shape, generator=generator, dtype=dtype)
            ab_t = float(schedule.alpha_bar[t])
            known = math.sqrt(ab_t) * reference + math.sqrt(1.0 - ab_t) * known_noise
            unknown = schedule.reverse_step(x, t, eps_hat, step_noise)
            x = (known * m + unknown * (1.0 - m)) * v
        elif nxt == cur + 1:
            renoise = torch.randn(x.shape, generator=generator, dtype=dtype)
            x = schedule.renoise_one(x, cur, renoise) * v
        else:
            raise AssertionError("time sequence must move by one step")
        if on_step is not None:
            on_step(nxt, x)
    return x


def _fast_loop(
    model: OccDenoiser,
    bundle: ConditionBundle,
    schedule: DiffusionSchedule,
    valid: torch.Tensor,
    steps: int,
    generator: torch.Generator,
    cfg_scale: float,
    on_step=None,
) -> torch.Tensor:
    c = model.config.channels
    rows, cols = model.config.map_rows, model.config.map_cols
    dtype = next(model.parameters()).dtype
    x = torch.randn((c, rows, cols), generator=generator, dtype=dtype) * valid[None].to(dtype)
    times = schedule.strided_times(steps)
    for cur, nxt in zip(times, times[1:]):
        with torch.no_grad():
            eps_hat = occ_denoise_step(
                model, x[None], torch.tensor([cur]), bundle, cfg_scale
            )[0]
        x = schedule.ddim_step(x, cur, nxt, eps_hat) * valid[None]
        if on_step is not None:
            on_step(nxt, x)
    return x


def _valid_mask(plane_dims, rows, cols) -> torch.Tensor:
    x_h, y_h, _, _ = plane_dims
    valid = torch.ones(rows, cols)
    valid[x_h:, y_h:] = 0.0
    return valid


def sample_occupancy_latents(
    model: OccDenoiser,
    bundle: ConditionBundle,
    schedule: DiffusionSchedule,
    latent_scale: float,
    plane_dims: tuple[int, int, int, int],
    seed: int,
    steps: int | None = None,
    cfg_scale: float | None = None,
    on_step=None,
) -> Triplane:
    """Ancestral (steps None) or strided fast sampling; returns unscaled planes."""
    generator = torch.Generator().manual_seed(seed)
    rows, cols = model.config.map_rows, model.config.map_cols
    valid = _valid_mask(plane_dims, rows, cols)
    cfg = schedule.cfg_scale if cfg_scale is None else cfg_scale
    if steps is None or steps >= schedule.timesteps:
        dtype = next(model.parameters()).dtype
        zero_ref = torch.zeros(model.config.channels, rows, cols, dtype=dtype)
        x0 = _masked_loop(
            model, bundle, schedule, torch.zeros(rows, cols), zero_ref, valid,
            ResampleSpec(n_resample=1, jump=0), generator, cfg, on_step,
        )
    else:
        x0 = _fast_loop(model, bundle, schedule, valid, steps, generator, cfg, on_step)
    packed = (x0 / latent_scale).permute(1, 2, 0).numpy()
    x_h, y_h, z_h, _ = plane_dims
    return unpack_triplane(packed.astype(np.float32), x_h, y_h, z_h)


def outpaint_triplane(
    model: OccDenoiser,
    h_ref: Triplane,
    mask: np.ndarray,
    bundle: ConditionBundle,
    schedule: DiffusionSchedule,
    latent_scale: float,
    seed: int,
    resample: ResampleSpec | tuple[int, int] = ResampleSpec(),
    cfg_scale: float | None = None,
    on_step=None,
) -> Triplane:
    """Masked generation synchronized with the reference planes.

    ``h_ref`` must already live in the output chunk's frame (see
    ``shift_reference``); ``mask`` is 1 on packed cells shared with it.
    """
    if isinstance(resample, tuple):
        resample = ResampleSpec(*resample)
    x_h, y_h, z_h, c = h_ref.dims
    rows, cols = model.config.map_rows, model.config.map_cols
    mask_t = torch.from_numpy(np.asarray(mask, dtype=np.float32))
    if mask_t.shape != (rows, cols):
        raise ValueError(f"mask shape {tuple(mask_t.shape)} != packed map ({rows}, {cols})")
    if not torch.logical_or(mask_t == 0, mask_t == 1).all():
        raise ValueError("mask must be binary")
    dtype = next(model.parameters()).dtype
    reference = (
        torch.from_numpy(pack_triplane(h_ref)).permute(2, 0, 1).to(dtype) * latent_scale
    )
    valid = _valid_mask(h_ref.dims, rows, cols)
    generator = torch.Generator().manual_seed(seed)
    cfg = schedule.cfg_scale if cfg_scale is None else cfg_scale
    x0 = _masked_loop(
        model, bundle, schedule, mask_t, reference, valid, resample, generator, cfg, on_step
    )
    packed = (x0 / latent_scale).permute(1, 2, 0).numpy()
    return unpack_triplane(packed.astype(np.float32), x_h, y_h, z_h)
