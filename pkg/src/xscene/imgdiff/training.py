"""Rendered paired corpus and noise-prediction training for images."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..checkpoint import load_checkpoint, save_checkpoint
from ..render.gaussians import rasterize, voxels_to_gaussians
from ..scene.cameras import Camera, project_layout_to_perspective
from ..schedule import DiffusionSchedule
from ..toydata import ToyScene, camera_rig, shade_rasters
from ..triplane.vae import TrainingDiverged
from .denoiser import ImgDenoiserConfig
from .model import ImageModel, MultiViewBatch, relative_pose
from .warp import warp_reference

PERSPECTIVE_CLASS_IDS = (3, 6)


@dataclass
class RenderedScene:
    """Cached per-view rasters, shaded images, and conditioning inputs."""

    images: np.ndarray  # (V, H, W, 3)
    semantic: np.ndarray  # (V, H, W)
    depth: np.ndarray  # (V, H, W)
    perspective: np.ndarray  # (V, C_persp, H, W)
    cameras: list[Camera]
    scene: ToyScene


def render_scene_views(
    scene: ToyScene, cameras: list[Camera] | None = None, texture_seed: int | None = None
) -> RenderedScene:
    cameras = cameras or camera_rig()
    prims = voxels_to_gaussians(scene.occupancy)
    class_count = scene.occupancy.world.class_count
    images, semantics, depths, persps = [], [], [], []
    for cam in cameras:
        semantic, depth = rasterize(prims, cam, class_count=class_count)
        pm = project_layout_to_perspective(
            scene.boxes, scene.lanes, cam, class_ids=PERSPECTIVE_CLASS_IDS
        )
        seed = scene.seed if texture_seed is None else texture_seed
        images.append(shade_rasters(semantic, depth, texture_seed=seed))
        semantics.append(semantic)
        depths.append(depth)
        persps.append(np.moveaxis(pm.data, -1, 0))
    return RenderedScene(
        images=np.stack(images),
        semantic=np.stack(semantics),
        depth=np.stack(depths),
        perspective=np.stack(persps).astype(np.float32),
        cameras=cameras,
        scene=scene,
    )


def scene_conditions(model: ImageModel, rendered: RenderedScene, rel_pose=None):
    return model.build_conditions(
        semantic=rendered.semantic,
        depth=rendered.depth,
        perspective=rendered.perspective,
        cameras=rendered.cameras,
        boxes=rendered.scene.boxes,
        world=rendered.scene.occupancy.world,
        text=rendered.scene.description.summary_text(),
        rel_pose=rel_pose,
    )


@dataclass
class ImgTrainConfig:
    steps: int = 900
    lr: float = 2e-3
    p_drop: float = 0.1
    seed: int = 0
    use_geo: bool = True  # ablation hook: drop e_geo when False


def _to_diffusion_images(images: np.ndarray) -> torch.Tensor:
    """[0,1] -> [-1,1] tensor (V, 3, H, W)."""
    return torch.from_numpy(np.moveaxis(images, -1, 1)).to(torch.float32) * 2.0 - 1.0


def train_image_diffusion(
    rendered: list[RenderedScene],
    schedule: DiffusionSchedule,
    model: ImageModel,
    config: ImgTrainConfig,
) -> tuple[ImageModel, list[dict]]:
    torch.manual_seed(config.seed)
    gen = torch.Generator().manual_seed(config.seed + 1)
    rng = np.random.default_rng(config.seed + 2)
    opt = torch.optim.AdamW(model.parameters(), lr=config.lr)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=config.steps)
    ab = torch.tensor(schedule.alpha_bar, dtype=torch.float32)
    x0s = [_to_diffusion_images(r.images) for r in rendered]

    history = []
    for step in range(config.steps):
        i = int(rng.integers(0, len(rendered)))
        x0 = x0s[i][None]
        t = torch.from_numpy(rng.integers(1, schedule.timesteps + 1, size=1)).long()
        noise = torch.randn(x0.shape, generator=gen)
        ab_t = ab[t][:, None, None, None, None]
        x_t = ab_t.sqrt() * x0 + (1 - ab_t).sqrt() * noise
        if rng.random() < config.p_drop:
            cond = model.null_conditions(x0.shape[1])
        else:
            cond = scene_conditions(model, rendered[i])
            if not config.use_geo:
                cond.e_geo = torch.zeros_like(cond.e_geo)
        eps_hat = model.predict_eps(x_t, t, cond)
        loss = (noise - eps_hat).pow(2).mean()
        if not torch.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched.step()
        history.append({"step": step, "loss": float(loss.item())})
    return model, history


@dataclass
class ExtrapPair:
    """Reference rig views plus ground-truth views from a shifted rig."""

    reference: RenderedScene
    target: RenderedScene
    shift: np.ndarray  # world-frame rig translation


def make_extrapolation_pair(
    scene: ToyScene, shift: np.ndarray, cameras: list[Camera] | None = None
) -> ExtrapPair:
    cameras = cameras or camera_rig()
    ref = render_scene_views(scene, cameras)
    shifted = camera_rig(position=np.array([shift[0], shift[1], 1.6]))
    tgt = render_scene_views(scene, shifted)
    return ExtrapPair(reference=ref, target=tgt, shift=np.asarray(shift, dtype=float))


def extrapolation_inputs(pair: ExtrapPair) -> tuple[np.ndarray, np.ndarray]:
    """(V, 7, H, W) reference/warp/mask stack and its validity masks."""
    stacks, masks = [], []
    for v, (cam_ref, cam_new) in enumerate(zip(pair.reference.cameras, pair.target.cameras)):
        warped, mask = warp_reference(
            pair.reference.images[v], pair.reference.depth[v], cam_ref, cam_new
        )
        ref = np.moveaxis(pair.reference.images[v], -1, 0) * 2.0 - 1.0
        wrp = np.moveaxis(warped, -1, 0) * 2.0 - 1.0
        stacks.append(np.concatenate([ref, wrp, mask[None]], axis=0))
        masks.append(mask)
    return np.stack(stacks).astype(np.float32), np.stack(masks)


def train_extrapolation(
    pairs: list[ExtrapPair],
    schedule: DiffusionSchedule,
    model: ImageModel,
    config: ImgTrainConfig,
) -> tuple[ImageModel, list[dict]]:
    """Fine-tuning pass: inputs are [x_t, x_ref, warped, mask] per view."""
    if model.config.in_channels != 3 + 7:
        raise ValueError("extrapolation model needs in_channels == 10")
    torch.manual_seed(config.seed)
    gen = torch.Generator().manual_seed(config.seed + 1)
    rng = np.random.default_rng(config.seed + 2)
    opt = torch.optim.AdamW(model.parameters(), lr=config.lr)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=config.steps)
    ab = torch.tensor(schedule.alpha_bar, dtype=torch.float32)
    prepped = []
    for pair in pairs:
        stack, _ = extrapolation_inputs(pair)
        rel = relative_pose(pair.reference.cameras[0], pair.target.cameras[0])
        prepped.append(
            (
                _to_diffusion_images(pair.target.images),
                torch.from_numpy(stack),
                pair,
                rel,
            )
        )

    history = []
    for step in range(config.steps):
        i = int(rng.integers(0, len(prepped)))
        x0, stack, pair, rel = prepped[i]
        x0 = x0[None]
        t = torch.from_numpy(rng.integers(1, schedule.timesteps + 1, size=1)).long()
        noise = torch.randn(x0.shape, generator=gen)
        ab_t = ab[t][:, None, None, None, None]
        x_t = ab_t.sqrt() * x0 + (1 - ab_t).sqrt() * noise
        x_in = torch.cat([x_t, stack[None]], dim=2)
        cond = scene_conditions(model, pair.target, rel_pose=rel)
        eps_hat = model.predict_eps(x_in, t, cond)
        loss = (noise - eps_hat).pow(2).mean()
        if not torch.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched.step()
        history.append({"step": step, "loss": float(loss.item())})
    return model, history


IMG_CKPT_KIND = "image_diffusion"


def save_image_model(model: ImageModel, schedule: DiffusionSchedule, path: Path | str) -> None:
    save_checkpoint(
        path,
        IMG_CKPT_KIND,
        {"config": asdict(model.config), "schedule": schedule.to_doc()},
        {k: v for k, v in model.state_dict().items()},
    )


def load_image_model(path: Path | str) -> tuple[ImageModel, DiffusionSchedule]:
    manifest, tensors = load_checkpoint(path, expect_kind=IMG_CKPT_KIND)
    model = ImageModel(ImgDenoiserConfig(**manifest["config"]))
    model.load_state_dict({k: torch.from_numpy(np.array(v)) for k, v in tensors.items()})
    model.eval()
    return model, DiffusionSchedule.from_doc(manifest["schedule"])
