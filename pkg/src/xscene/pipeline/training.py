"""One-stop training of every desk-scale checkpoint the service needs."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from ..imgdiff import (
    ImageModel,
    ImgDenoiserConfig,
    ImgTrainConfig,
    make_extrapolation_pair,
    render_scene_views,
    save_image_model,
    train_extrapolation,
    train_image_diffusion,
)
from ..layout import (
    LayoutModelConfig,
    LayoutTrainConfig,
    save_layout_model,
    train_layout_diffusion,
)
from ..metrics import (
    ExtractorConfig,
    ExtractorTrainConfig,
    FeatureExtractor,
    images_to_tensor,
    save_extractor,
    train_extractor,
    voxels_to_planes,
)
from ..occdiff import (
    OccDenoiser,
    OccDenoiserConfig,
    OccTrainConfig,
    RawConditions,
    prepare_latent_dataset,
    save_occ_model,
    train_occ_diffusion,
)
from ..schedule import DiffusionSchedule
from ..scene import desk_world
from ..toydata import generate_toy_corpus, relation_corpus
from ..triplane import VaeConfig, VaeTrainConfig, save_vae, train_vae


def train_all_models(
    out_dir: Path,
    corpus_size: int = 48,
    corpus_seed: int = 1,
    quick: bool = False,
) -> dict[str, Path]:
    """Trains layout, VAE, occupancy and image diffusion, extrapolation,
    and the two feature extractors; returns the checkpoint paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    scale = 0.02 if quick else 1.0

    def steps(n: int) -> int:
        return max(10, int(n * scale))

    corpus = generate_toy_corpus(corpus_size, seed=corpus_seed)
    grids = [s.occupancy for s in corpus]
    split = max(1, int(len(grids) * 0.85))
    schedule = DiffusionSchedule.cosine(100, cfg_scale=1.2)
    world = desk_world()
    paths: dict[str, Path] = {}

    vae, _ = train_vae(
        grids[:split], grids[split:], VaeConfig(), VaeTrainConfig(steps=steps(1500), seed=0)
    )
    paths["vae"] = out_dir / "vae.ckpt"
    save_vae(vae, paths["vae"])

    relations = [(g, b, l) for _, g, b, l in relation_corpus(256, seed=3)]
    layout_model, _ = train_layout_diffusion(
        relations, world, schedule, LayoutModelConfig(),
        LayoutTrainConfig(steps=steps(3000), seed=0),
    )
    paths["layout"] = out_dir / "layout.ckpt"
    save_layout_model(layout_model, schedule, paths["layout"])

    occ_model = OccDenoiser(OccDenoiserConfig())
    pairs = [
        (
            s.occupancy,
            RawConditions(world=world, boxes=s.boxes, lanes=s.lanes, description=s.description),
        )
        for s in corpus[:split]
    ]
    dataset = prepare_latent_dataset(vae, pairs, occ_model)
    occ_model, _ = train_occ_diffusion(
        dataset, schedule, occ_model, OccTrainConfig(steps=steps(2500), seed=0)
    )
    paths["occupancy"] = out_dir / "occupancy.ckpt"
    save_occ_model(occ_model, schedule, dataset.scale, dataset.plane_dims, paths["occupancy"])

    rendered = [render_scene_views(s) for s in corpus[: min(16, split)]]
    image_model = ImageModel(ImgDenoiserConfig())
    image_model, _ = train_image_diffusion(
        rendered, schedule, image_model, ImgTrainConfig(steps=steps(900), seed=0)
    )
    paths["image"] = out_dir / "image.ckpt"
    save_image_model(image_model, schedule, paths["image"])

    rng = np.random.default_rng(7)
    extrap_pairs = [
        make_extrapolation_pair(s, rng.uniform(6.0, 14.0) * np.array([1.0, 0.0]))
        for s in corpus[: min(12, split)]
    ]
    extrap_model = ImageModel(ImgDenoiserConfig(in_channels=10))
    extrap_model, _ = train_extrapolation(
        extrap_pairs, schedule, extrap_model, ImgTrainConfig(steps=steps(700), seed=0)
    )
    paths["extrapolation"] = out_dir / "extrapolation.ckpt"
    save_image_model(extrap_model, schedule, paths["extrapolation"])

    extractor_cfg = ExtractorTrainConfig(steps=steps(300), seed=0)
    vox_inputs = torch.stack([voxels_to_planes(g) for g in grids[: min(24, split)]])
    vox_model = train_extractor(
        vox_inputs, ExtractorConfig(kind="voxel", in_channels=7 * 8), extractor_cfg
    )
    paths["extractor_voxel"] = out_dir / "extractor_voxel.ckpt"
    save_extractor(FeatureExtractor(vox_model, "toy-voxel-ae"), paths["extractor_voxel"])

    images = np.stack([r.images[0] for r in rendered[: min(16, len(rendered))]])
    img_model = train_extractor(
        images_to_tensor(images),
        ExtractorConfig(kind="image", in_channels=3, input_hw=(64, 112)),
        extractor_cfg,
    )
    paths["extractor_image"] = out_dir / "extractor_image.ckpt"
    save_extractor(FeatureExtractor(img_model, "toy-image-ae"), paths["extractor_image"])
    return paths
