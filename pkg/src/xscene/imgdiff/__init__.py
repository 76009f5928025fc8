"""Multi-view image diffusion with geometric guidance and extrapolation."""

from .denoiser import CrossViewAttention, ImgDenoiser, ImgDenoiserConfig
from .model import (
    ImageConditions,
    ImageModel,
    MultiViewBatch,
    relative_pose,
    rotation_6d,
)
from .sampling import (
    MissingExtrapolationHead,
    extrapolate_views,
    psnr,
    sample_views,
)
from .training import (
    IMG_CKPT_KIND,
    ExtrapPair,
    ImgTrainConfig,
    RenderedScene,
    extrapolation_inputs,
    load_image_model,
    make_extrapolation_pair,
    render_scene_views,
    save_image_model,
    scene_conditions,
    train_extrapolation,
    train_image_diffusion,
)
from .warp import warp_reference
