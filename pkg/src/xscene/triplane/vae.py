"""Occupancy <-> triplane compression with a gather-based decoder."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..checkpoint import load_checkpoint, save_checkpoint
from ..scene.world import OccupancyGrid, WorldSpec
from .gather import gather_features, gather_features_batched
from .metrics import reconstruct_metrics
from .types import PLANE_NAMES, DeformAttnParams, Triplane


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class VaeConfig:
    grid_dims: tuple[int, int, int] = (64, 64, 8)
    class_count: int = 7
    latent_channels: int = 8
    hidden: int = 48
    head_hidden: int = 96
    k_points: int = 4
    pe_dim: int = 32
    pe_bands: int = 8
    kl_weight: float = 1e-4
    downsample: tuple[int, int, int] = (2, 2, 1)

    @property
    def latent_dims(self) -> tuple[int, int, int]:
        return tuple(g // d for g, d in zip(self.grid_dims, self.downsample))


class _PlaneEncoder(nn.Module):
    """Axis-pooled one-hot volume -> (mu, logvar) feature plane."""

    def __init__(self, in_channels: int, hidden: int, out_channels: int, stride):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(in_channels, hidden, 3, stride=stride, padding=1),
            nn.SiLU(),
            nn.Conv2d(hidden, hidden, 3, padding=1),
            nn.SiLU(),
            nn.Conv2d(hidden, 2 * out_channels, 3, padding=1),
        )
        # Start the posterior sharp: unit-variance latent noise at init drowns
        # small structures (a pedestrian is one latent cell of weak signal).
        with torch.no_grad():
            self.net[-1].bias[out_channels:].fill_(-6.0)

    def forward(self, x):
        return self.net(x)


class OccupancyVae(nn.Module):
    def __init__(self, config: VaeConfig):
        super().__init__()
        self.config = config
        c0 = config.class_count
        c = config.latent_channels
        h = config.hidden
        dx, dy, dz = config.downsample
        if dz != 1:
            raise ValueError("z axis is never downsampled in this architecture")
        self.enc_xy = _PlaneEncoder(2 * c0, h, c, stride=(dx, dy))
        self.enc_xz = _PlaneEncoder(2 * c0, h, c, stride=(dx, dz))
        self.enc_yz = _PlaneEncoder(2 * c0, h, c, stride=(dy, dz))
        self.w_weight = nn.ParameterDict(
            {p: nn.Parameter(torch.randn(config.k_points, config.pe_dim) * 0.3) for p in PLANE_NAMES}
        )
        self.w_offset = nn.ParameterDict(
            {p: nn.Parameter(torch.randn(config.k_points, 2, config.pe_dim) * 0.01) for p in PLANE_NAMES}
        )
        self.head = nn.Sequential(
            nn.Linear(c, config.head_hidden),
            nn.SiLU(),
            nn.Linear(config.head_hidden, config.head_hidden),
            nn.SiLU(),
            nn.Linear(config.head_hidden, c0),
        )

    # -- encoding ---------------------------------------------------------

    def _check_dims(self, labels_shape):
        gx, gy, gz = self.config.grid_dims
        if tuple(labels_shape) != (gx, gy, gz):
            raise ValueError(f"grid dims {labels_shape} do not match config {self.config.grid_dims}")
        dx, dy, _ = self.config.downsample
        if gx % dx or gy % dy:
            raise ValueError("grid dims must be divisible by the downsample factor")

    def encode_stats(self, onehot: torch.Tensor) -> dict[str, tuple[torch.Tensor, torch.Tensor]]:
        """onehot: (B, C0, X, Y, Z) -> per-plane (mu, logvar), channels first.

        Each plane sees mean and max pooling over its reduced axis; the max
        keeps thin structures visible that the mean dilutes.
        """
        stats = {}
        for name, enc, axis in (
            ("xy", self.enc_xy, 4),
            ("xz", self.enc_xz, 3),
            ("yz", self.enc_yz, 2),
        ):
            pooled = torch.cat([onehot.mean(dim=axis), onehot.max(dim=axis).values], dim=1)
            out = enc(pooled)
            c = self.config.latent_channels
            stats[name] = (out[:, :c], out[:, c:])
        return stats

    @staticmethod
    def reparameterize(stats, generator: torch.Generator | None = None):
        planes = {}
        kl_terms = []
        for name, (mu, logvar) in stats.items():
            noise = torch.randn(mu.shape, generator=generator, dtype=mu.dtype)
            planes[name] = mu + torch.exp(0.5 * logvar) * noise
            kl_terms.append(-0.5 * (1 + logvar - mu.pow(2) - logvar.exp()).mean())
        return planes, torch.stack(kl_terms).mean()

    # -- decoding ---------------------------------------------------------

    def decode_queries(self, planes: dict[str, torch.Tensor], queries: torch.Tensor) -> torch.Tensor:
        """planes: channels-first (C, A, B) per plane; queries (Q, 3) -> (Q, classes)."""
        channels_last = {name: planes[name].permute(1, 2, 0) for name in PLANE_NAMES}
        feats = gather_features(
            channels_last,
            {p: self.w_weight[p] for p in PLANE_NAMES},
            {p: self.w_offset[p] for p in PLANE_NAMES},
            queries,
            self.config.pe_dim,
            self.config.pe_bands,
        )
        return self.head(feats)

    def decode_queries_batched(
        self, planes: dict[str, torch.Tensor], queries: torch.Tensor
    ) -> torch.Tensor:
        """planes: (B, C, A, Bd) per plane; queries (B, Q, 3) -> (B, Q, classes)."""
        channels_last = {name: planes[name].permute(0, 2, 3, 1) for name in PLANE_NAMES}
        feats = gather_features_batched(
            channels_last,
            {p: self.w_weight[p] for p in PLANE_NAMES},
            {p: self.w_offset[p] for p in PLANE_NAMES},
            queries,
            self.config.pe_dim,
            self.config.pe_bands,
        )
        return self.head(feats)

    # -- public numpy-facing API -------------------------------------------

    def encode_grid(self, occ: OccupancyGrid) -> Triplane:
        """Deterministic encoding (posterior mean)."""
        self._check_dims(occ.labels.shape)
        self.eval()
        with torch.no_grad():
            onehot = one_hot_volume(occ.labels, self.config.class_count)[None]
            stats = self.encode_stats(onehot)
            planes = {name: mu[0] for name, (mu, _) in stats.items()}
        return Triplane(
            h_xy=planes["xy"].permute(1, 2, 0).numpy(),
            h_xz=planes["xz"].permute(1, 2, 0).numpy(),
            h_yz=planes["yz"].permute(1, 2, 0).numpy(),
        )

    def decode_logits(self, h: Triplane, chunk: int = 16384) -> np.ndarray:
        """(X, Y, Z, classes) logits at every voxel center."""
        self.eval()
        gx, gy, gz = self.config.grid_dims
        queries = voxel_center_queries(self.config.grid_dims)
        planes = {
            name: torch.from_numpy(h.plane(name).copy()).permute(2, 0, 1)
            for name in PLANE_NAMES
        }
        outs = []
        with torch.no_grad():
            for start in range(0, queries.shape[0], chunk):
                part = torch.from_numpy(queries[start : start + chunk]).to(torch.float32)
                outs.append(self.decode_queries(planes, part))
        return torch.cat(outs).reshape(gx, gy, gz, -1).numpy()

    def decode_triplane(self, h: Triplane, world: WorldSpec) -> OccupancyGrid:
        logits = self.decode_logits(h)
        labels = np.argmax(logits, axis=-1).astype(np.uint8)
        return OccupancyGrid(world, labels)

    def gather_params(self) -> DeformAttnParams:
        return DeformAttnParams(
            k_points=self.config.k_points,
            pe_dim=self.config.pe_dim,
            pe_bands=self.config.pe_bands,
            w_weight={p: self.w_weight[p].detach().numpy().astype(np.float64) for p in PLANE_NAMES},
            w_offset={p: self.w_offset[p].detach().numpy().astype(np.float64) for p in PLANE_NAMES},
        )


def one_hot_volume(labels: np.ndarray, class_count: int) -> torch.Tensor:
    """(X, Y, Z) uint8 labels -> (C, X, Y, Z) float tensor."""
    t = torch.from_numpy(labels.copy()).long()
    return F.one_hot(t, class_count).permute(3, 0, 1, 2).to(torch.float32)


def voxel_center_queries(grid_dims) -> np.ndarray:
    """Normalized [0,1]^3 voxel-center coordinates, x-major, z fastest."""
    gx, gy, gz = grid_dims
    xs = (np.arange(gx) + 0.5) / gx
    ys = (np.arange(gy) + 0.5) / gy
    zs = (np.arange(gz) + 0.5) / gz
    q = np.stack(np.meshgrid(xs, ys, zs, indexing="ij"), axis=-1)
    return q.reshape(-1, 3).astype(np.float64)


@dataclass
class VaeTrainConfig:
    steps: int = 1500
    batch_size: int = 4
    queries_per_scene: int = 3072
    balanced_fraction: float = 0.35  # share of queries drawn per-class
    boundary_fraction: float = 0.3  # share drawn at label boundaries
    lr: float = 2e-3
    seed: int = 0
    eval_every: int = 400
    class_weight_power: float = 0.0
    noise_free_latents: bool = False  # True disables reparameterization noise


def class_weights(grids: list[OccupancyGrid], class_count: int, power: float) -> torch.Tensor:
    counts = np.zeros(class_count, dtype=np.float64)
    for grid in grids:
        counts += np.bincount(grid.labels.reshape(-1), minlength=class_count)
    freq = counts / counts.sum()
    present = freq > 0
    ref = np.median(freq[present])
    weights = np.ones(class_count)
    weights[present] = (ref / freq[present]) ** power
    return torch.tensor(np.clip(weights, 0.1, 20.0), dtype=torch.float32)


def _boundary_indices(labels: np.ndarray) -> np.ndarray:
    """Flat indices of voxels with a differing 6-neighbor."""
    boundary = np.zeros(labels.shape, dtype=bool)
    for axis in range(3):
        a = np.swapaxes(labels, 0, axis)
        b = np.swapaxes(boundary, 0, axis)
        diff = a[1:] != a[:-1]
        b[1:] |= diff
        b[:-1] |= diff
    return np.flatnonzero(boundary.reshape(-1))


def _query_sampler(grids, train_config, rng):
    """Per-grid flat-index sampler mixing uniform, class-balanced, and
    boundary-focused draws."""
    per_class = []
    boundaries = []
    for grid in grids:
        flat = grid.labels.reshape(-1)
        per_class.append({int(c): np.flatnonzero(flat == c) for c in np.unique(flat)})
        boundaries.append(_boundary_indices(grid.labels))
    total = grids[0].labels.size
    n_queries = train_config.queries_per_scene
    n_balanced = int(n_queries * train_config.balanced_fraction)
    n_boundary = int(n_queries * train_config.boundary_fraction)
    n_uniform = max(n_queries - n_balanced - n_boundary, 0)

    def sample(grid_idx: int) -> np.ndarray:
        classes = per_class[grid_idx]
        picks = [rng.integers(0, total, size=n_uniform)]
        if len(boundaries[grid_idx]):
            picks.append(rng.choice(boundaries[grid_idx], size=n_boundary, replace=True))
        share = max(n_balanced // max(len(classes), 1), 1)
        for pool in classes.values():
            picks.append(rng.choice(pool, size=share, replace=True))
        sel = np.concatenate(picks)[:n_queries]
        if len(sel) < n_queries:
            sel = np.concatenate([sel, rng.integers(0, total, size=n_queries - len(sel))])
        return sel

    return sample


def train_vae(
    train_grids: list[OccupancyGrid],
    val_grids: list[OccupancyGrid],
    config: VaeConfig,
    train_config: VaeTrainConfig,
) -> tuple[OccupancyVae, list[dict]]:
    """Cross-entropy + KL training; held-out IoU/mIoU lands in the history."""
    torch.manual_seed(train_config.seed)
    gen = torch.Generator().manual_seed(train_config.seed + 1)
    rng = np.random.default_rng(train_config.seed + 2)
    model = OccupancyVae(config)
    opt = torch.optim.Adam(model.parameters(), lr=train_config.lr)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=train_config.steps)
    weights = class_weights(train_grids, config.class_count, train_config.class_weight_power)

    volumes = [one_hot_volume(g.labels, config.class_count) for g in train_grids]
    flat_labels = [torch.from_numpy(g.labels.reshape(-1).copy()).long() for g in train_grids]
    all_queries = voxel_center_queries(config.grid_dims)
    sampler = _query_sampler(train_grids, train_config, rng)

    history: list[dict] = []
    for step in range(train_config.steps):
        idxs = rng.choice(
            len(volumes), size=min(train_config.batch_size, len(volumes)), replace=False
        )
        batch = torch.stack([volumes[i] for i in idxs])
        stats = model.encode_stats(batch)
        if train_config.noise_free_latents:
            planes = {name: mu for name, (mu, _) in stats.items()}
            kl = torch.zeros(())
        else:
            planes, kl = model.reparameterize(stats, generator=gen)

        sels = [sampler(i) for i in idxs]
        queries = torch.stack(
            [torch.from_numpy(all_queries[sel]).to(torch.float32) for sel in sels]
        )
        targets = torch.stack(
            [flat_labels[i][torch.from_numpy(sel)] for i, sel in zip(idxs, sels)]
        )
        logits = model.decode_queries_batched(planes, queries)
        ce = F.cross_entropy(
            logits.reshape(-1, config.class_count), targets.reshape(-1), weight=weights
        )
        loss = ce + config.kl_weight * kl

        if not torch.isfinite(loss):
            raise TrainingDiverged(
                f"non-finite loss at step {step}: ce={ce.item()} kl={kl.item()}"
            )
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched.step()

        record = {
            "step": step,
            "loss": float(loss.item()),
            "ce": float(ce.item()),
            "kl": float(kl.item()),
        }
        if val_grids and (step + 1) % train_config.eval_every == 0:
            record.update(evaluate_vae(model, val_grids))
        history.append(record)

    if val_grids and "val_miou" not in history[-1]:
        history[-1].update(evaluate_vae(model, val_grids))
    return model, history


def evaluate_vae(model: OccupancyVae, grids: list[OccupancyGrid]) -> dict:
    ious, mious = [], []
    for grid in grids:
        h = model.encode_grid(grid)
        pred = model.decode_triplane(h, grid.world)
        iou, miou = reconstruct_metrics(pred, grid)
        ious.append(iou)
        mious.append(miou)
    return {"val_iou": float(np.mean(ious)), "val_miou": float(np.mean(mious))}


VAE_CKPT_KIND = "triplane_vae"


def save_vae(model: OccupancyVae, path: Path | str) -> None:
    save_checkpoint(
        path,
        VAE_CKPT_KIND,
        {"config": asdict(model.config)},
        {k: v for k, v in model.state_dict().items()},
    )


def load_vae(path: Path | str) -> OccupancyVae:
    manifest, tensors = load_checkpoint(path, expect_kind=VAE_CKPT_KIND)
    cfg = manifest["config"]
    cfg["grid_dims"] = tuple(cfg["grid_dims"])
    cfg["downsample"] = tuple(cfg["downsample"])
    config = VaeConfig(**cfg)
    model = OccupancyVae(config)
    model.load_state_dict({k: torch.from_numpy(np.array(v)) for k, v in tensors.items()})
    model.eval()
    return model
