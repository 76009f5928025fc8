"""Desk-scale feature extractors: small convolutional autoencoders trained
on the toy corpus, with global-average-pooled bottlenecks as features."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from ..scene.world import OccupancyGrid
from .distances import FeatureSet


@dataclass(frozen=True)
class ExtractorConfig:
    kind: str  # "voxel" | "image"
    in_channels: int
    feature_dim: int = 32
    hidden: int = 24
    input_hw: tuple[int, int] = (64, 64)


class ConvAutoencoder(nn.Module):
    def __init__(self, config: ExtractorConfig):
        super().__init__()
        self.config = config
        c, h = config.in_channels, config.hidden
        d = config.feature_dim
        self.encoder = nn.Sequential(
            nn.Conv2d(c, h, 3, stride=2, padding=1), nn.SiLU(),
            nn.Conv2d(h, h * 2, 3, stride=2, padding=1), nn.SiLU(),
            nn.Conv2d(h * 2, d, 3, stride=2, padding=1),
        )
        self.decoder = nn.Sequential(
            nn.ConvTranspose2d(d, h * 2, 2, stride=2), nn.SiLU(),
            nn.ConvTranspose2d(h * 2, h, 2, stride=2), nn.SiLU(),
            nn.ConvTranspose2d(h, c, 2, stride=2),
        )

    def features(self, x: torch.Tensor) -> torch.Tensor:
        """Global average pooling over the bottleneck map."""
        return self.encoder(x).mean(dim=(2, 3))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.decoder(self.encoder(x))


def voxels_to_planes(grid: OccupancyGrid) -> torch.Tensor:
    """(C0*Z, X, Y) one-hot volume with z folded into channels."""
    labels = torch.from_numpy(grid.labels.copy()).long()
    onehot = F.one_hot(labels, grid.world.class_count).permute(3, 2, 0, 1)
    c, z, x, y = onehot.shape
    return onehot.reshape(c * z, x, y).to(torch.float32)


def images_to_tensor(images: np.ndarray) -> torch.Tensor:
    """(N, H, W, 3) floats in [0,1] -> (N, 3, H, W)."""
    return torch.from_numpy(np.moveaxis(images, -1, 1)).to(torch.float32)


@dataclass
class ExtractorTrainConfig:
    steps: int = 400
    batch_size: int = 8
    lr: float = 2e-3
    seed: int = 0


def train_extractor(
    inputs: torch.Tensor,  # (N, C, H, W)
    config: ExtractorConfig,
    train_config: ExtractorTrainConfig,
) -> ConvAutoencoder:
    torch.manual_seed(train_config.seed)
    rng = np.random.default_rng(train_config.seed + 1)
    model = ConvAutoencoder(config)
    opt = torch.optim.Adam(model.parameters(), lr=train_config.lr)
    for _ in range(train_config.steps):
        idx = rng.choice(inputs.shape[0], size=min(train_config.batch_size, inputs.shape[0]), replace=False)
        batch = inputs[idx]
        recon = model(batch)
        loss = F.mse_loss(recon, batch)
        opt.zero_grad()
        loss.backward()
        opt.step()
    model.eval()
    return model


class FeatureExtractor:
    """Checkpoint-backed deterministic feature extractor."""

    def __init__(self, model: ConvAutoencoder, extractor_id: str):
        self.model = model
        self.extractor_id = extractor_id

    @property
    def feature_dim(self) -> int:
        return self.model.config.feature_dim

    def extract(self, inputs: torch.Tensor, source: str = "") -> FeatureSet:
        self.model.eval()
        with torch.no_grad():
            feats = self.model.features(inputs)
        return FeatureSet(
            features=feats.numpy().astype(np.float64),
            extractor_id=self.extractor_id,
            source=source,
        )

    def extract_grids(self, grids: list[OccupancyGrid], source: str = "") -> FeatureSet:
        stacked = torch.stack([voxels_to_planes(g) for g in grids])
        return self.extract(stacked, source)

    def extract_images(self, images: np.ndarray, source: str = "") -> FeatureSet:
        return self.extract(images_to_tensor(images), source)


EXTRACTOR_CKPT_KIND = "feature_extractor"


def save_extractor(extractor: FeatureExtractor, path: Path | str) -> None:
    cfg = asdict(extractor.model.config)
    cfg["input_hw"] = list(cfg["input_hw"])
    save_checkpoint(
        path,
        EXTRACTOR_CKPT_KIND,
        {"config": cfg, "extractor_id": extractor.extractor_id},
        {k: v for k, v in extractor.model.state_dict().items()},
    )


def load_extractor(path: Path | str) -> FeatureExtractor:
    manifest, tensors = load_checkpoint(path, expect_kind=EXTRACTOR_CKPT_KIND)
    cfg = dict(manifest["config"])
    cfg["input_hw"] = tuple(cfg["input_hw"])
    model = ConvAutoencoder(ExtractorConfig(**cfg))
    model.load_state_dict({k: torch.from_numpy(np.array(v)) for k, v in tensors.items()})
    model.eval()
    return FeatureExtractor(model, manifest["extractor_id"])
