"""Layout sampling: ancestral denoising with optional anchored nodes."""

from __future__ import annotations

import torch

from ..schedule import DiffusionSchedule
from ..scene.boxes import Box7, LanePolyline
from ..scene.graphs import SceneGraph
from ..scene.world import WorldSpec
from .model import (
    GraphEmbedding,
    LayoutModel,
    boxes_to_diffusion,
    diffusion_to_boxes,
    diffusion_to_lanes,
)


def sample_layout(
    graph: SceneGraph,
    model: LayoutModel,
    schedule: DiffusionSchedule,
    world: WorldSpec,
    seed: int,
    steps: int | None = None,
    anchors: dict[str, Box7] | None = None,
) -> tuple[list[Box7], list[LanePolyline]]:
    """Denoise boxes and lanes for the graph's nodes.

    ``anchors`` maps node ids to boxes whose parameters are held fixed: at
    every step the anchored tokens are replaced by the forward-diffused
    ground truth (the layout-space analog of masked outpainting).
    Deterministic per seed; box nodes precede lane nodes in token order.
    """
    if steps is not None and steps < 1:
        raise ValueError("steps must be >= 1")
    generator = torch.Generator().manual_seed(seed)
    tensors = model.featurize_graph(graph).boxes_first()
    embedding = model.embed_graph(tensors, generator=generator)
    node_vecs = model.gcn_refine(embedding)

    m_box = int((~tensors.is_lane).sum())
    m_lane = int(tensors.is_lane.sum())
    box_ids = tensors.node_ids[:m_box]
    categories = [graph.node(i).category for i in tensors.node_ids]

    anchors = anchors or {}
    anchor_rows = []
    anchor_vals = []
    for i, node_id in enumerate(box_ids):
        if node_id in anchors:
            anchor_rows.append(i)
            anchor_vals.append(boxes_to_diffusion([anchors[node_id]], world)[0])
    anchor_idx = torch.tensor(anchor_rows, dtype=torch.long)
    anchor_x0 = torch.stack(anchor_vals) if anchor_vals else torch.zeros(0, 8)

    boxes = torch.randn((m_box, 8), generator=generator)
    lanes = torch.randn((m_lane, model.config.lane_points, 2), generator=generator)

    def pin_anchors(x_box: torch.Tensor, t: int) -> torch.Tensor:
        if len(anchor_rows) == 0:
            return x_box
        ab_t = float(schedule.alpha_bar[t])
        noise = torch.randn(anchor_x0.shape, generator=generator)
        pinned = ab_t**0.5 * anchor_x0 + (1 - ab_t) ** 0.5 * noise
        x_box = x_box.clone()
        x_box[anchor_idx] = pinned
        return x_box

    use_fast = steps is not None and steps < schedule.timesteps
    with torch.no_grad():
        if use_fast:
            times = schedule.strided_times(steps)
            boxes = pin_anchors(boxes, times[0])
            for cur, nxt in zip(times, times[1:]):
                t = torch.tensor([cur])
                eps_box, eps_lane = model.predict_noise(boxes, lanes, t, node_vecs)
                boxes = schedule.ddim_step(boxes, cur, nxt, eps_box)
                lanes = schedule.ddim_step(lanes, cur, nxt, eps_lane)
                boxes = pin_anchors(boxes, cur)
        else:
            boxes = pin_anchors(boxes, schedule.timesteps)
            for t_step in range(schedule.timesteps, 0, -1):
                t = torch.tensor([t_step])
                eps_box, eps_lane = model.predict_noise(boxes, lanes, t, node_vecs)
                z_box = torch.randn(boxes.shape, generator=generator)
                z_lane = torch.randn(lanes.shape, generator=generator)
                boxes = schedule.reverse_step(boxes, t_step, eps_box, z_box)
                lanes = schedule.reverse_step(lanes, t_step, eps_lane, z_lane)
                # Anchored tokens follow the forward-diffused ground truth at
                # this step's noise level, mirroring the masked latent update.
                boxes = pin_anchors(boxes, t_step)

    out_boxes = diffusion_to_boxes(boxes, world, categories[:m_box], model)
    out_lanes = diffusion_to_lanes(lanes, world)
    id_to_box = dict(zip(box_ids, out_boxes))
    return out_boxes, out_lanes, id_to_box
