"""Triplane compression of occupancy volumes and the deformable gather."""

from .gather import (
    GatherDiagnostics,
    bilinear_sample,
    deformable_gather,
    fourier_features,
    gather_features,
)
from .metrics import reconstruct_metrics
from .types import PLANE_AXES, PLANE_NAMES, DeformAttnParams, Triplane
from .vae import (
    OccupancyVae,
    TrainingDiverged,
    VaeConfig,
    VaeTrainConfig,
    evaluate_vae,
    load_vae,
    one_hot_volume,
    save_vae,
    train_vae,
    voxel_center_queries,
)
