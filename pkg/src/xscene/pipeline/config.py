"""Service configuration: file-based with environment overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

ENV_PREFIX = "XSCENE_"


@dataclass
class CheckpointPaths:
    layout: str = "checkpoints/layout.ckpt"
    vae: str = "checkpoints/vae.ckpt"
    occupancy: str = "checkpoints/occupancy.ckpt"
    image: str = "checkpoints/image.ckpt"
    extrapolation: str = "checkpoints/extrapolation.ckpt"
    extractor_voxel: str = "checkpoints/extractor_voxel.ckpt"
    extractor_image: str = "checkpoints/extractor_image.ckpt"


@dataclass
class AppConfig:
    store_dir: str = "store"
    checkpoints: CheckpointPaths = field(default_factory=CheckpointPaths)
    workers: int = 2
    queue_depth: int = 16
    host: str = "127.0.0.1"
    port: int = 8000
    overlap_fraction: float = 0.5
    sample_steps: int = 20
    cfg_scale: float = 1.2
    retrieval_k: int = 3
    memory_frames: int = 12
    frontend_dist: str = ""

    @classmethod
    def load(cls, path: str | Path | None = None) -> "AppConfig":
        """YAML file (flat keys; checkpoint paths under ``checkpoints:``),
        then XSCENE_* environment overrides."""
        config = cls()
        if path is not None:
            doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
            ckpts = doc.pop("checkpoints", {})
            for key, value in doc.items():
                if not hasattr(config, key):
                    raise KeyError(f"unknown config key {key!r}")
                setattr(config, key, type(getattr(config, key))(value))
            for key, value in ckpts.items():
                if not hasattr(config.checkpoints, key):
                    raise KeyError(f"unknown checkpoint key {key!r}")
                setattr(config.checkpoints, key, str(value))
        for f in fields(cls):
            if f.name == "checkpoints":
                continue
            env = os.environ.get(ENV_PREFIX + f.name.upper())
            if env is not None:
                setattr(config, f.name, type(getattr(config, f.name))(env))
        for f in fields(CheckpointPaths):
            env = os.environ.get(ENV_PREFIX + "CKPT_" + f.name.upper())
            if env is not None:
                setattr(config.checkpoints, f.name, env)
        return config
