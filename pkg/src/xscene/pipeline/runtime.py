"""Loaded models, clients, and the description memory used by the service."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

from ..describe import ClientSuite, MemoryBank, build_memory, client_suite_from_env
from ..describe.memory import Frame
from ..imgdiff import load_image_model
from ..layout import load_layout_model
from ..metrics import load_extractor
from ..occdiff import load_occ_model
from ..scene.world import desk_world
from ..toydata import generate_toy_corpus
from ..triplane import load_vae
from .config import AppConfig
from .store import SceneStore


def _file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:12]


@dataclass
class Runtime:
    config: AppConfig
    store: SceneStore
    clients: ClientSuite
    bank: MemoryBank
    layout_model: object
    layout_schedule: object
    vae: object
    occ_model: object
    occ_schedule: object
    occ_scale: float
    occ_plane_dims: tuple
    image_model: object
    image_schedule: object
    extrap_model: object = None
    extractor_voxel: object = None
    extractor_image: object = None
    model_versions: dict = None

    @property
    def world(self):
        return desk_world()

    @classmethod
    def from_config(cls, config: AppConfig, require_extras: bool = False) -> "Runtime":
        """Loads every checkpoint; a missing required one fails startup."""
        ckpts = config.checkpoints
        layout_model, layout_schedule = load_layout_model(ckpts.layout)
        vae = load_vae(ckpts.vae)
        occ_model, occ_schedule, occ_scale, occ_dims = load_occ_model(ckpts.occupancy)
        image_model, image_schedule = load_image_model(ckpts.image)
        extrap_model = None
        if require_extras or Path(ckpts.extrapolation).exists():
            extrap_model, _ = load_image_model(ckpts.extrapolation)
        extractor_voxel = extractor_image = None
        if Path(ckpts.extractor_voxel).exists():
            extractor_voxel = load_extractor(ckpts.extractor_voxel)
        if Path(ckpts.extractor_image).exists():
            extractor_image = load_extractor(ckpts.extractor_image)
        versions = {
            name: _file_digest(getattr(ckpts, name))
            for name in ("layout", "vae", "occupancy", "image")
        }
        if extrap_model is not None:
            versions["extrapolation"] = _file_digest(ckpts.extrapolation)
        store = SceneStore(config.store_dir)
        store.clean_staging()
        clients = client_suite_from_env()
        bank = load_or_build_memory(store.root / "memory", clients, config.memory_frames)
        return cls(
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
            extrap_model=extrap_model,
            extractor_voxel=extractor_voxel,
            extractor_image=extractor_image,
            model_versions=versions,
        )


def load_or_build_memory(directory: Path, clients: ClientSuite, frames: int) -> MemoryBank:
    """Persisted description memory; built deterministically from the toy
    corpus on first start."""
    if (directory / "manifest.json").exists():
        return MemoryBank.load(directory)
    scenes = generate_toy_corpus(frames, seed=900)
    class_names = {i: n for i, n in enumerate(scenes[0].occupancy.world.class_names)}
    frame_list = []
    for scene in scenes:
        desc = scene.description
        hints = {
            "time_of_day": desc.style.time_of_day,
            "weather": desc.style.weather,
            "environment": desc.style.environment,
            "road_condition": desc.style.road_condition,
            "foreground": [[r.category, r.attributes] for r in desc.foreground],
            "background": [[r.category, r.attributes] for r in desc.background],
            "abstract": desc.abstract,
        }
        frame_list.append(
            Frame(
                frame_id=f"toy-{scene.seed}",
                images=[],
                boxes=scene.boxes,
                lanes=scene.lanes,
                hints=hints,
                source="toy-corpus",
            )
        )
    bank = build_memory(frame_list, clients, class_names)
    bank.save(directory)
    return bank
