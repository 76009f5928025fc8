"""Noise-prediction training for the layout model."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from ..checkpoint import load_checkpoint, save_checkpoint
from ..schedule import DiffusionSchedule
from ..scene.graphs import SceneGraph
from ..scene.world import WorldSpec
from ..triplane.vae import TrainingDiverged
from .model import (
    LayoutModel,
    LayoutModelConfig,
    boxes_to_diffusion,
    lanes_to_diffusion,
)


@dataclass
class LayoutTrainConfig:
    steps: int = 3000
    batch_size: int = 64
    lr: float = 2e-3
    seed: int = 0


@dataclass
class _Group:
    """Samples sharing one graph structure, so they batch directly."""

    tensors: object  # GraphTensors (shared node/edge index layout)
    node_semantic: torch.Tensor  # (B, M, dim_s)
    node_category: torch.Tensor  # (B, M)
    edge_semantic: torch.Tensor  # (B, E, dim_s)
    edge_relation: torch.Tensor  # (B, E)
    boxes: torch.Tensor  # (B, M_box, 8)
    lanes: torch.Tensor  # (B, M_lane, N, 2)


def _build_groups(model, corpus, world):
    groups: dict = {}
    for graph, boxes, lanes in corpus:
        tensors = model.featurize_graph(graph).boxes_first()
        key = tensors.structure_key()
        entry = groups.setdefault(key, {"tensors": tensors, "items": []})
        entry["items"].append(
            (
                tensors.node_semantic,
                tensors.node_category,
                tensors.edge_semantic,
                tensors.edge_relation,
                boxes_to_diffusion(boxes, world),
                lanes_to_diffusion(lanes, world),
            )
        )
    built = []
    for entry in groups.values():
        items = entry["items"]
        built.append(
            _Group(
                tensors=entry["tensors"],
                node_semantic=torch.stack([i[0] for i in items]),
                node_category=torch.stack([i[1] for i in items]),
                edge_semantic=torch.stack([i[2] for i in items]),
                edge_relation=torch.stack([i[3] for i in items]),
                boxes=torch.stack([i[4] for i in items]),
                lanes=torch.stack([i[5] for i in items]),
            )
        )
    return built


def layout_eps_mse(
    eps_box, eps_lane, pred_box, pred_lane
) -> torch.Tensor:
    """Pooled mean squared noise error over box and lane elements."""
    se = (eps_box - pred_box).pow(2).sum() + (eps_lane - pred_lane).pow(2).sum()
    count = eps_box.numel() + eps_lane.numel()
    return se / count


def train_layout_diffusion(
    corpus: list[tuple[SceneGraph, list, list]],
    world: WorldSpec,
    schedule: DiffusionSchedule,
    config: LayoutModelConfig,
    train_config: LayoutTrainConfig,
    model: LayoutModel | None = None,
) -> tuple[LayoutModel, list[dict]]:
    torch.manual_seed(train_config.seed)
    gen = torch.Generator().manual_seed(train_config.seed + 1)
    rng = np.random.default_rng(train_config.seed + 2)
    model = model or LayoutModel(config)
    opt = torch.optim.AdamW(model.parameters(), lr=train_config.lr)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=train_config.steps)
    groups = _build_groups(model, corpus, world)
    weights = np.array([g.boxes.shape[0] for g in groups], dtype=np.float64)
    weights /= weights.sum()
    ab = torch.tensor(schedule.alpha_bar, dtype=torch.float32)

    history = []
    for step in range(train_config.steps):
        group = groups[int(rng.choice(len(groups), p=weights))]
        n = group.boxes.shape[0]
        take = min(train_config.batch_size, n)
        idxs = torch.from_numpy(rng.choice(n, size=take, replace=False))
        from .model import GraphEmbedding, GraphTensors  # local alias for clarity

        noise8 = torch.randn((take, group.node_semantic.shape[1], 8), generator=gen)
        node_feats = torch.cat(
            [
                group.node_semantic[idxs],
                model.category_table(group.node_category[idxs]),
                noise8,
            ],
            dim=-1,
        )
        edge_feats = torch.cat(
            [group.edge_semantic[idxs], model.relation_table(group.edge_relation[idxs])],
            dim=-1,
        )
        embedding = GraphEmbedding(
            nodes=node_feats, edges=edge_feats, edge_index=group.tensors.edge_index
        )
        node_vecs = model.gcn_refine(embedding)

        x0_box = group.boxes[idxs]
        x0_lane = group.lanes[idxs]
        t = torch.from_numpy(rng.integers(1, schedule.timesteps + 1, size=take)).long()
        eps_box = torch.randn(x0_box.shape, generator=gen)
        eps_lane = torch.randn(x0_lane.shape, generator=gen)
        ab_t = ab[t]
        xt_box = ab_t[:, None, None].sqrt() * x0_box + (1 - ab_t[:, None, None]).sqrt() * eps_box
        xt_lane = (
            ab_t[:, None, None, None].sqrt() * x0_lane
            + (1 - ab_t[:, None, None, None]).sqrt() * eps_lane
        )
        pred_box, pred_lane = model.predict_noise(xt_box, xt_lane, t, node_vecs)
        loss = layout_eps_mse(eps_box, eps_lane, pred_box, pred_lane)
        if not torch.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched.step()
        history.append({"step": step, "loss": float(loss.item())})
    return model, history


LAYOUT_CKPT_KIND = "layout_diffusion"


def save_layout_model(
    model: LayoutModel, schedule: DiffusionSchedule, path: Path | str
) -> None:
    cfg = asdict(model.config)
    cfg["category_class_ids"] = [list(p) for p in cfg["category_class_ids"]]
    save_checkpoint(
        path,
        LAYOUT_CKPT_KIND,
        {"config": cfg, "schedule": schedule.to_doc()},
        {k: v for k, v in model.state_dict().items()},
    )


def load_layout_model(path: Path | str) -> tuple[LayoutModel, DiffusionSchedule]:
    manifest, tensors = load_checkpoint(path, expect_kind=LAYOUT_CKPT_KIND)
    cfg = dict(manifest["config"])
    for key in ("categories", "lane_categories", "relations"):
        cfg[key] = tuple(cfg[key])
    cfg["category_class_ids"] = tuple(tuple(p) for p in cfg["category_class_ids"])
    model = LayoutModel(LayoutModelConfig(**cfg))
    model.load_state_dict({k: torch.from_numpy(np.array(v)) for k, v in tensors.items()})
    model.eval()
    return model, DiffusionSchedule.from_doc(manifest["schedule"])
