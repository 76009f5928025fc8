"""Conditional diffusion over packed triplane latents with outpainting."""

from .conditions import (
    BatchedConditions,
    CondFeatures,
    ConditionBundle,
    ConditionEncoder,
    RawConditions,
    collate_bundles,
    layout_bev_raster,
)
from .denoiser import OccDenoiser, OccDenoiserConfig, occ_denoise_step
from .packing import (
    DIRECTIONS,
    PackingError,
    pack_triplane,
    packed_shape,
    plan_chunk_masks,
    shift_reference,
    unpack_triplane,
    zero_corner,
)
from .sampling import (
    ResampleSpec,
    outpaint_triplane,
    sample_occupancy_latents,
)
from .training import (
    OCC_CKPT_KIND,
    LatentDataset,
    OccTrainConfig,
    load_occ_model,
    masked_eps_mse,
    prepare_latent_dataset,
    save_occ_model,
    train_occ_diffusion,
)
