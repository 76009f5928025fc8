"""Noise-prediction training over packed triplane latents."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from ..checkpoint import load_checkpoint, save_checkpoint
from ..schedule import DiffusionSchedule
from ..triplane.types import Triplane
from ..triplane.vae import OccupancyVae, TrainingDiverged
from .conditions import RawConditions, collate_bundles
from .denoiser import OccDenoiser, OccDenoiserConfig
from .packing import pack_triplane


@dataclass
class OccTrainConfig:
    steps: int = 2500
    batch_size: int = 8
    lr: float = 2e-3
    p_drop: float = 0.1  # condition dropout probability for CFG training
    seed: int = 0


@dataclass
class LatentDataset:
    """Packed, scaled latents with their conditions and the validity mask."""

    latents: torch.Tensor  # (N, C, rows, cols), already scaled
    features: list  # CondFeatures per sample
    scale: float  # multiply raw packed latents by this before diffusion
    valid_mask: torch.Tensor  # (rows, cols) 1 where the packed map is meaningful
    plane_dims: tuple[int, int, int, int]  # (X_h, Y_h, Z_h, C)


def prepare_latent_dataset(
    vae: OccupancyVae,
    scenes: list[tuple],
    model: OccDenoiser,
) -> LatentDataset:
    """scenes: list of (OccupancyGrid, RawConditions)."""
    packed = []
    features = []
    dims = None
    for grid, raw in scenes:
        h = vae.encode_grid(grid)
        dims = h.dims
        packed.append(torch.from_numpy(pack_triplane(h)).permute(2, 0, 1))
        features.append(model.conditions.featurize(raw))
    stack = torch.stack(packed)
    x_h, y_h, z_h, _ = dims
    valid = torch.ones(stack.shape[2], stack.shape[3])
    valid[x_h:, y_h:] = 0.0
    flat = stack[:, :, valid.bool()]
    scale = float(1.0 / flat.std().clamp(min=1e-6))
    return LatentDataset(
        latents=stack * scale * valid,
        features=features,
        scale=scale,
        valid_mask=valid,
        plane_dims=dims,
    )


def masked_eps_mse(
    eps: torch.Tensor, eps_hat: torch.Tensor, valid_mask: torch.Tensor
) -> torch.Tensor:
    """Mean squared error over valid packed cells only."""
    diff = (eps - eps_hat) * valid_mask
    denom = valid_mask.sum() * eps.shape[0] * eps.shape[1]
    return diff.pow(2).sum() / denom


def train_occ_diffusion(
    dataset: LatentDataset,
    schedule: DiffusionSchedule,
    model: OccDenoiser,
    config: OccTrainConfig,
) -> tuple[OccDenoiser, list[dict]]:
    torch.manual_seed(config.seed)
    gen = torch.Generator().manual_seed(config.seed + 1)
    rng = np.random.default_rng(config.seed + 2)
    opt = torch.optim.AdamW(model.parameters(), lr=config.lr)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=config.steps)
    valid = dataset.valid_mask[None, None]
    ab = torch.tensor(schedule.alpha_bar, dtype=torch.float32)

    history = []
    n = dataset.latents.shape[0]
    for step in range(config.steps):
        idxs = rng.choice(n, size=min(config.batch_size, n), replace=n < config.batch_size)
        x0 = dataset.latents[idxs]
        t = torch.from_numpy(
            rng.integers(1, schedule.timesteps + 1, size=len(idxs))
        ).long()
        noise = torch.randn(x0.shape, generator=gen) * valid
        ab_t = ab[t][:, None, None, None]
        x_t = ab_t.sqrt() * x0 + (1 - ab_t).sqrt() * noise

        bundles = []
        for i in idxs:
            if rng.random() < config.p_drop:
                bundles.append(model.conditions.null_bundle())
            else:
                bundles.append(model.conditions.encode(dataset.features[i]))
        eps_hat = model(x_t, t, collate_bundles(bundles))
        loss = masked_eps_mse(noise, eps_hat, valid)
        if not torch.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched.step()
        history.append({"step": step, "loss": float(loss.item())})
    return model, history


OCC_CKPT_KIND = "occupancy_diffusion"


def save_occ_model(
    model: OccDenoiser,
    schedule: DiffusionSchedule,
    latent_scale: float,
    plane_dims: tuple[int, int, int, int],
    path: Path | str,
) -> None:
    save_checkpoint(
        path,
        OCC_CKPT_KIND,
        {
            "config": asdict(model.config),
            "schedule": schedule.to_doc(),
            "latent_scale": latent_scale,
            "plane_dims": list(plane_dims),
        },
        {k: v for k, v in model.state_dict().items()},
    )


def load_occ_model(path: Path | str) -> tuple[OccDenoiser, DiffusionSchedule, float, tuple]:
    manifest, tensors = load_checkpoint(path, expect_kind=OCC_CKPT_KIND)
    model = OccDenoiser(OccDenoiserConfig(**manifest["config"]))
    model.load_state_dict({k: torch.from_numpy(np.array(v)) for k, v in tensors.items()})
    model.eval()
    schedule = DiffusionSchedule.from_doc(manifest["schedule"])
    return model, schedule, manifest["latent_scale"], tuple(manifest["plane_dims"])
