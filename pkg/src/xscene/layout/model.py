"""Scene-graph conditioned layout denoiser.

Nodes are embedded as text-encoder semantics + learned per-category
geometry + an 8-dim noise draw, refined by rounds of edge-conditioned
message passing, then used to condition a token transformer that jointly
denoises box parameter vectors and lane point sets. No token-position
information enters the transformer, so the whole stack is permutation
equivariant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from ..describe.clients import HashEmbedder
from ..nnblocks import sinusoidal_time_embedding
from ..scene.boxes import LANE_POINT_COUNT, Box7, LanePolyline, denormalize_box, normalize_box
from ..scene.graphs import RELATION_VOCABULARY, SceneGraph
from ..scene.world import WorldSpec

NOISE_DIM = 8


class UnknownCategoryError(ValueError):
    pass


@dataclass(frozen=True)
class LayoutModelConfig:
    categories: tuple[str, ...] = ("vehicle", "pedestrian", "lane", "ego")
    lane_categories: tuple[str, ...] = ("lane",)
    relations: tuple[str, ...] = RELATION_VOCABULARY
    category_class_ids: tuple[tuple[str, int], ...] = (
        ("vehicle", 3),
        ("pedestrian", 6),
        ("ego", 3),
    )
    dim_semantic: int = 32
    dim_geometric: int = 16
    gcn_rounds: int = 2
    gcn_hidden: int = 64
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    time_dim: int = 64
    lane_points: int = LANE_POINT_COUNT

    @property
    def node_dim(self) -> int:
        return self.dim_semantic + self.dim_geometric + NOISE_DIM

    @property
    def edge_dim(self) -> int:
        return self.dim_semantic + self.dim_geometric


@dataclass
class GraphTensors:
    """Featurized graph: everything embed_graph needs except the noise draw."""

    node_semantic: torch.Tensor  # (M, dim_semantic)
    node_category: torch.Tensor  # (M,) long
    edge_semantic: torch.Tensor  # (E, dim_semantic)
    edge_relation: torch.Tensor  # (E,) long
    edge_index: torch.Tensor  # (E, 2) long, (src, dst)
    is_lane: torch.Tensor  # (M,) bool
    node_ids: list[str] = field(default_factory=list)

    def structure_key(self) -> tuple:
        return (
            tuple(self.is_lane.tolist()),
            tuple(map(tuple, self.edge_index.tolist())),
        )

    def boxes_first(self) -> "GraphTensors":
        """Stable reorder putting box nodes before lane nodes.

        Token order in the denoiser is boxes-then-lanes; training and
        sampling both normalize through this so conditioning stays aligned.
        """
        order = torch.argsort(self.is_lane.to(torch.int8), stable=True)
        inverse = torch.empty_like(order)
        inverse[order] = torch.arange(len(order))
        return GraphTensors(
            node_semantic=self.node_semantic[order],
            node_category=self.node_category[order],
            edge_semantic=self.edge_semantic,
            edge_relation=self.edge_relation,
            edge_index=inverse[self.edge_index],
            is_lane=self.is_lane[order],
            node_ids=[self.node_ids[i] for i in order.tolist()],
        )


@dataclass
class GraphEmbedding:
    nodes: torch.Tensor  # (M, node_dim)
    edges: torch.Tensor  # (E, edge_dim)
    edge_index: torch.Tensor  # (E, 2)


class TransformerBlock(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(d_model)
        self.attn = nn.MultiheadAttention(d_model, n_heads, batch_first=True)
        self.norm2 = nn.LayerNorm(d_model)
        self.ff = nn.Sequential(
            nn.Linear(d_model, d_model * 2), nn.SiLU(), nn.Linear(d_model * 2, d_model)
        )

    def forward(self, x):
        h = self.norm1(x)
        attn, _ = self.attn(h, h, h, need_weights=False)
        x = x + attn
        return x + self.ff(self.norm2(x))


class LayoutModel(nn.Module):
    def __init__(self, config: LayoutModelConfig):
        super().__init__()
        self.config = config
        self.text_encoder = HashEmbedder(config.dim_semantic)
        self.category_table = nn.Embedding(len(config.categories), config.dim_geometric)
        self.relation_table = nn.Embedding(len(config.relations), config.dim_geometric)
        dv, de = config.node_dim, config.edge_dim
        # The message net emits separate halves for the edge's source and
        # destination, so the two roles of a directed relation stay
        # distinguishable after aggregation.
        self.gcn_message = nn.Sequential(
            nn.Linear(2 * dv + de, config.gcn_hidden), nn.SiLU(),
            nn.Linear(config.gcn_hidden, 2 * dv),
        )
        self.gcn_update = nn.Sequential(
            nn.Linear(2 * dv, config.gcn_hidden), nn.SiLU(),
            nn.Linear(config.gcn_hidden, dv),
        )
        d = config.d_model
        self.in_box = nn.Linear(8, d)
        self.in_lane = nn.Linear(config.lane_points * 2, d)
        self.type_embed = nn.Embedding(2, d)  # 0 = box token, 1 = lane token
        self.node_proj = nn.Linear(dv, d)
        self.time_mlp = nn.Sequential(
            nn.Linear(config.time_dim, d), nn.SiLU(), nn.Linear(d, d)
        )
        self.blocks = nn.ModuleList(
            TransformerBlock(d, config.n_heads) for _ in range(config.n_layers)
        )
        self.out_box = nn.Linear(d, 8)
        self.out_lane = nn.Linear(d, config.lane_points * 2)

    # -- graph featurization ------------------------------------------------

    def featurize_graph(self, graph: SceneGraph) -> GraphTensors:
        cat_index = {c: i for i, c in enumerate(self.config.categories)}
        rel_index = {r: i for i, r in enumerate(self.config.relations)}
        node_pos = {n.id: i for i, n in enumerate(graph.nodes)}
        semantics, cats, lanes = [], [], []
        for node in graph.nodes:
            if node.category not in cat_index:
                raise UnknownCategoryError(
                    f"category {node.category!r} has no geometric table row"
                )
            label = f"{node.category} {node.attributes}".strip()
            semantics.append(self.text_encoder.embed(label))
            cats.append(cat_index[node.category])
            lanes.append(node.category in self.config.lane_categories)
        e_sem, e_rel, e_idx = [], [], []
        for edge in graph.edges:
            if edge.relation not in rel_index:
                raise UnknownCategoryError(f"relation {edge.relation!r} unknown")
            e_sem.append(self.text_encoder.embed(edge.relation))
            e_rel.append(rel_index[edge.relation])
            e_idx.append((node_pos[edge.src], node_pos[edge.dst]))
        return GraphTensors(
            node_semantic=torch.tensor(np.array(semantics), dtype=torch.float32),
            node_category=torch.tensor(cats, dtype=torch.long),
            edge_semantic=torch.tensor(
                np.array(e_sem) if e_sem else np.zeros((0, self.config.dim_semantic)),
                dtype=torch.float32,
            ),
            edge_relation=torch.tensor(e_rel, dtype=torch.long),
            edge_index=torch.tensor(
                e_idx if e_idx else np.zeros((0, 2)), dtype=torch.long
            ).reshape(-1, 2),
            is_lane=torch.tensor(lanes, dtype=torch.bool),
            node_ids=[n.id for n in graph.nodes],
        )

    def embed_graph(
        self, tensors: GraphTensors, generator: torch.Generator | None = None
    ) -> GraphEmbedding:
        """Node vectors s_i + g_i + noise; edge vectors s_e + g_e."""
        noise = torch.randn(
            (tensors.node_semantic.shape[0], NOISE_DIM), generator=generator
        )
        nodes = torch.cat(
            [tensors.node_semantic, self.category_table(tensors.node_category), noise],
            dim=1,
        )
        edges = torch.cat(
            [tensors.edge_semantic, self.relation_table(tensors.edge_relation)], dim=1
        )
        return GraphEmbedding(nodes=nodes, edges=edges, edge_index=tensors.edge_index)

    def gcn_refine(self, embedding: GraphEmbedding, rounds: int | None = None) -> torch.Tensor:
        """Batched or unbatched: nodes (..., M, dv); rounds=0 is the identity."""
        rounds = self.config.gcn_rounds if rounds is None else rounds
        nodes = embedding.nodes
        edges = embedding.edges
        idx = embedding.edge_index
        if rounds < 0:
            raise ValueError("rounds must be >= 0")
        dv = self.config.node_dim
        for _ in range(rounds):
            if idx.shape[0] == 0:
                messages_mean = torch.zeros_like(nodes)
            else:
                src = nodes[..., idx[:, 0], :]
                dst = nodes[..., idx[:, 1], :]
                edge_feat = edges.expand(*nodes.shape[:-2], -1, -1) if edges.ndim < src.ndim else edges
                msg = self.gcn_message(torch.cat([src, edge_feat, dst], dim=-1))
                msg_to_src = msg[..., :dv]
                msg_to_dst = msg[..., dv:]
                m = nodes.shape[-2]
                sums = torch.zeros_like(nodes)
                counts = torch.zeros(m, dtype=nodes.dtype)
                for e, (s, d) in enumerate(idx.tolist()):
                    sums[..., s, :] = sums[..., s, :] + msg_to_src[..., e, :]
                    sums[..., d, :] = sums[..., d, :] + msg_to_dst[..., e, :]
                    counts[s] += 1
                    counts[d] += 1
                messages_mean = sums / counts.clamp(min=1.0)[:, None]
            nodes = self.gcn_update(torch.cat([nodes, messages_mean], dim=-1))
        return nodes

    # -- denoising ------------------------------------------------------------

    def predict_noise(
        self,
        boxes: torch.Tensor,  # (..., M_box, 8) diffusion-space parameters
        lanes: torch.Tensor,  # (..., M_lane, N, 2)
        t: torch.Tensor,  # (...,) timesteps
        node_vecs: torch.Tensor,  # (..., M_box + M_lane, dv), box nodes first
    ) -> tuple[torch.Tensor, torch.Tensor]:
        unbatched = boxes.ndim == 2
        if unbatched:
            boxes, lanes = boxes[None], lanes[None]
            node_vecs = node_vecs[None]
            t = t.reshape(1)
        b, m_box = boxes.shape[:2]
        m_lane = lanes.shape[1]
        if node_vecs.shape[1] != m_box + m_lane:
            raise ValueError(
                f"node count {node_vecs.shape[1]} != boxes {m_box} + lanes {m_lane}"
            )
        box_tokens = self.in_box(boxes) + self.type_embed.weight[0]
        lane_flat = lanes.reshape(b, m_lane, self.config.lane_points * 2)
        lane_tokens = self.in_lane(lane_flat) + self.type_embed.weight[1]
        tokens = torch.cat([box_tokens, lane_tokens], dim=1)
        tokens = tokens + self.node_proj(node_vecs)
        t_emb = self.time_mlp(
            sinusoidal_time_embedding(t, self.config.time_dim).to(tokens.dtype)
        )
        tokens = tokens + t_emb[:, None, :]
        for block in self.blocks:
            tokens = block(tokens)
        eps_box = self.out_box(tokens[:, :m_box])
        eps_lane = self.out_lane(tokens[:, m_box:]).reshape(
            b, m_lane, self.config.lane_points, 2
        )
        if unbatched:
            return eps_box[0], eps_lane[0]
        return eps_box, eps_lane

    def class_id_for(self, category: str) -> int:
        table = dict(self.config.category_class_ids)
        return table.get(category, 0)


# -- diffusion-space parameterization ---------------------------------------


def boxes_to_diffusion(boxes: list[Box7], world: WorldSpec) -> torch.Tensor:
    rows = []
    for box in boxes:
        vec = normalize_box(box, world)
        vec = np.concatenate([2.0 * vec[:3] - 1.0, vec[3:]])
        rows.append(vec)
    return torch.tensor(
        np.array(rows) if rows else np.zeros((0, 8)), dtype=torch.float32
    )


def diffusion_to_boxes(
    mat: torch.Tensor, world: WorldSpec, categories: list[str], model: LayoutModel
) -> list[Box7]:
    out = []
    for i, row in enumerate(mat.detach().numpy()):
        unit = np.clip((row[:3] + 1.0) / 2.0, 0.0, 1.0)
        sin_c, cos_c = row[6], row[7]
        if sin_c == 0.0 and cos_c == 0.0:
            cos_c = 1.0
        vec = np.concatenate([unit, np.clip(row[3:6], -3.0, 3.0), [sin_c, cos_c]])
        out.append(
            denormalize_box(
                vec, world, class_id=model.class_id_for(categories[i]), instance_id=i + 1
            )
        )
    return out


def lanes_to_diffusion(lanes: list[LanePolyline], world: WorldSpec) -> torch.Tensor:
    lo = np.asarray(world.bounds_min[:2])
    hi = np.asarray(world.bounds_max[:2])
    arrs = []
    for lane in lanes:
        unit = (lane.points - lo) / (hi - lo)
        arrs.append(2.0 * unit - 1.0)
    n = lanes[0].points.shape[0] if lanes else LANE_POINT_COUNT
    return torch.tensor(
        np.array(arrs) if arrs else np.zeros((0, n, 2)), dtype=torch.float32
    )


def diffusion_to_lanes(tensor: torch.Tensor, world: WorldSpec) -> list[LanePolyline]:
    lo = np.asarray(world.bounds_min[:2])
    hi = np.asarray(world.bounds_max[:2])
    out = []
    for arr in tensor.detach().numpy():
        unit = np.clip((arr + 1.0) / 2.0, 0.0, 1.0)
        out.append(LanePolyline(points=lo + unit * (hi - lo)))
    return out
