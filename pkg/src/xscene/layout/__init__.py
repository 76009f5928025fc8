"""Scene-graph to layout generation via conditional diffusion."""

from .model import (
    NOISE_DIM,
    GraphEmbedding,
    GraphTensors,
    LayoutModel,
    LayoutModelConfig,
    UnknownCategoryError,
    boxes_to_diffusion,
    diffusion_to_boxes,
    diffusion_to_lanes,
    lanes_to_diffusion,
)
from .sampling import sample_layout
from .training import (
    LAYOUT_CKPT_KIND,
    LayoutTrainConfig,
    layout_eps_mse,
    load_layout_model,
    save_layout_model,
    train_layout_diffusion,
)
