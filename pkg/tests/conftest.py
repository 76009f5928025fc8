"""Shared fixtures: the toy corpus and cached trained models.

Training fixtures persist checkpoints under tests/_ckpt_cache keyed by a
config digest, so a cold run trains once and later runs load instantly.
Bump CACHE_SALT when training semantics change.
"""

import hashlib
import json
from pathlib import Path

import pytest
import torch

torch.set_num_threads(2)

CACHE_SALT = "v1"
CACHE_DIR = Path(__file__).parent / "_ckpt_cache"

CORPUS_SEED = 1
CORPUS_SIZE = 48
TRAIN_SPLIT = 40


def cache_path(name: str, payload: dict) -> Path:
    digest = hashlib.sha256(
        (CACHE_SALT + json.dumps(payload, sort_keys=True, default=str)).encode()
    ).hexdigest()[:16]
    CACHE_DIR.mkdir(exist_ok=True)
    return CACHE_DIR / f"{name}-{digest}.ckpt"


@pytest.fixture(scope="session")
def toy_corpus():
    from xscene.toydata import generate_toy_corpus

    return generate_toy_corpus(CORPUS_SIZE, seed=CORPUS_SEED)


@pytest.fixture(scope="session")
def desk_vae(toy_corpus):
    from xscene.triplane import (
        VaeConfig,
        VaeTrainConfig,
        evaluate_vae,
        load_vae,
        save_vae,
        train_vae,
    )

    config = VaeConfig()
    train_config = VaeTrainConfig(steps=1500, seed=0)
    path = cache_path("vae", {"c": config.__dict__, "t": train_config.__dict__,
                              "corpus": [CORPUS_SEED, CORPUS_SIZE, TRAIN_SPLIT]})
    grids = [s.occupancy for s in toy_corpus]
    if path.exists():
        model = load_vae(path)
        metrics = evaluate_vae(model, grids[TRAIN_SPLIT:])
    else:
        model, history = train_vae(
            grids[:TRAIN_SPLIT], grids[TRAIN_SPLIT:], config, train_config
        )
        save_vae(model, path)
        metrics = {k: v for k, v in history[-1].items() if k.startswith("val_")}
    return model, metrics


@pytest.fixture(scope="session")
def desk_schedule():
    from xscene.schedule import DiffusionSchedule

    return DiffusionSchedule.cosine(100, cfg_scale=1.2)


@pytest.fixture(scope="session")
def desk_occ_model(toy_corpus, desk_vae, desk_schedule):
    from xscene.occdiff import (
        OccDenoiser,
        OccDenoiserConfig,
        OccTrainConfig,
        RawConditions,
        load_occ_model,
        prepare_latent_dataset,
        save_occ_model,
        train_occ_diffusion,
    )

    vae, _ = desk_vae
    config = OccDenoiserConfig()
    train_config = OccTrainConfig(steps=2500, seed=0)
    path = cache_path(
        "occdiff",
        {"c": config.__dict__, "t": train_config.__dict__, "corpus": CORPUS_SEED},
    )
    if path.exists():
        return load_occ_model(path)
    model = OccDenoiser(config)
    pairs = [
        (
            s.occupancy,
            RawConditions(
                world=s.occupancy.world, boxes=s.boxes, lanes=s.lanes, description=s.description
            ),
        )
        for s in toy_corpus[:TRAIN_SPLIT]
    ]
    dataset = prepare_latent_dataset(vae, pairs, model)
    model, _ = train_occ_diffusion(dataset, desk_schedule, model, train_config)
    save_occ_model(model, desk_schedule, dataset.scale, dataset.plane_dims, path)
    return load_occ_model(path)


@pytest.fixture(scope="session")
def desk_layout_model(desk_schedule):
    from xscene.layout import (
        LayoutModelConfig,
        LayoutTrainConfig,
        load_layout_model,
        save_layout_model,
        train_layout_diffusion,
    )
    from xscene.scene import desk_world
    from xscene.toydata import relation_corpus

    config = LayoutModelConfig()
    train_config = LayoutTrainConfig(steps=3000, seed=0)
    path = cache_path(
        "layout",
        {"c": str(config), "t": train_config.__dict__, "corpus": "relations-v1"},
    )
    if path.exists():
        return load_layout_model(path)
    corpus = [(g, b, l) for _, g, b, l in relation_corpus(256, seed=3)]
    model, _ = train_layout_diffusion(
        corpus, desk_world(), desk_schedule, config, train_config
    )
    save_layout_model(model, desk_schedule, path)
    return load_layout_model(path)


@pytest.fixture(scope="session")
def rendered_corpus(toy_corpus):
    from xscene.imgdiff import render_scene_views

    return [render_scene_views(s) for s in toy_corpus[:16]]


@pytest.fixture(scope="session")
def desk_image_model(rendered_corpus, desk_schedule):
    from xscene.imgdiff import (
        ImageModel,
        ImgDenoiserConfig,
        ImgTrainConfig,
        load_image_model,
        save_image_model,
        train_image_diffusion,
    )

    config = ImgDenoiserConfig()
    train_config = ImgTrainConfig(steps=900, seed=0)
    path = cache_path(
        "imgdiff", {"c": config.__dict__, "t": train_config.__dict__, "corpus": CORPUS_SEED}
    )
    if path.exists():
        return load_image_model(path)
    model = ImageModel(config)
    model, _ = train_image_diffusion(rendered_corpus, desk_schedule, model, train_config)
    save_image_model(model, desk_schedule, path)
    return load_image_model(path)


@pytest.fixture(scope="session")
def desk_extrap_model(toy_corpus, desk_schedule):
    from xscene.imgdiff import (
        ImageModel,
        ImgDenoiserConfig,
        ImgTrainConfig,
        load_image_model,
        make_extrapolation_pair,
        save_image_model,
        train_extrapolation,
    )
    import numpy as np

    config = ImgDenoiserConfig(in_channels=10)
    train_config = ImgTrainConfig(steps=700, seed=0)
    path = cache_path(
        "imgextrap", {"c": config.__dict__, "t": train_config.__dict__, "corpus": CORPUS_SEED}
    )
    if path.exists():
        return load_image_model(path)[0]
    rng = np.random.default_rng(7)
    pairs = []
    for scene in toy_corpus[:12]:
        shift = rng.uniform(6.0, 14.0) * np.array([1.0, 0.0])
        pairs.append(make_extrapolation_pair(scene, shift))
    model = ImageModel(config)
    model, _ = train_extrapolation(pairs, desk_schedule, model, train_config)
    save_image_model(model, desk_schedule, path)
    return load_image_model(path)[0]


@pytest.fixture()
def make_runtime(
    tmp_path,
    desk_vae,
    desk_occ_model,
    desk_layout_model,
    desk_image_model,
    desk_extrap_model,
    desk_schedule,
):
    """Factory for a fully-loaded Runtime over a fresh store directory."""

    def _make(store_dir=None, with_extrap=True, memory_frames=6):
        from xscene.describe import client_suite_from_env
        from xscene.pipeline import AppConfig, Runtime, SceneStore
        from xscene.pipeline.runtime import load_or_build_memory

        vae, _ = desk_vae
        occ_model, occ_schedule, occ_scale, occ_dims = desk_occ_model
        layout_model, layout_schedule = desk_layout_model
        image_model, image_schedule = desk_image_model
        config = AppConfig(store_dir=str(store_dir or tmp_path / "store"))
        store = SceneStore(config.store_dir)
        store.clean_staging()
        clients = client_suite_from_env()
        bank = load_or_build_memory(store.root / "memory", clients, memory_frames)
        return Runtime(
            config=config,
            store=store,
            clients=clients,
            bank=bank,
            layout_model=layout_model,
            layout_schedule=layout_schedule,
            vae=vae,
            occ_model=occ_model,
            occ_schedule=occ_schedule,
            occ_scale=occ_scale,
            occ_plane_dims=occ_dims,
            image_model=image_model,
            image_schedule=image_schedule,
            extrap_model=desk_extrap_model if with_extrap else None,
            model_versions={"layout": "fixture", "vae": "fixture",
                            "occupancy": "fixture", "image": "fixture"},
        )

    return _make


@pytest.fixture(scope="session")
def desk_extractors(toy_corpus):
    import torch as _torch

    from xscene.metrics import (
        ExtractorConfig,
        ExtractorTrainConfig,
        FeatureExtractor,
        load_extractor,
        save_extractor,
        train_extractor,
        voxels_to_planes,
        images_to_tensor,
    )
    from xscene.imgdiff import render_scene_views

    train_config = ExtractorTrainConfig(steps=300, seed=0)
    vox_cfg = ExtractorConfig(kind="voxel", in_channels=7 * 8, input_hw=(64, 64))
    img_cfg = ExtractorConfig(kind="image", in_channels=3, input_hw=(64, 112))
    vox_path = cache_path("extractor-vox", {"c": vox_cfg.__dict__, "t": train_config.__dict__})
    img_path = cache_path("extractor-img", {"c": img_cfg.__dict__, "t": train_config.__dict__})
    if not vox_path.exists():
        inputs = _torch.stack([voxels_to_planes(s.occupancy) for s in toy_corpus[:24]])
        model = train_extractor(inputs, vox_cfg, train_config)
        save_extractor(FeatureExtractor(model, "toy-voxel-ae"), vox_path)
    if not img_path.exists():
        import numpy as np

        images = np.stack(
            [render_scene_views(s).images[0] for s in toy_corpus[:24]]
        )
        model = train_extractor(images_to_tensor(images), img_cfg, train_config)
        save_extractor(FeatureExtractor(model, "toy-image-ae"), img_path)
    return load_extractor(vox_path), load_extractor(img_path)
