"""Generative evaluation metrics over pluggable feature extractors."""

from .distances import (
    FeatureSet,
    frechet_distance,
    kernel_distance,
    mmd2_unbiased,
    poly3_kernel_matrix,
)
from .features import (
    EXTRACTOR_CKPT_KIND,
    ConvAutoencoder,
    ExtractorConfig,
    ExtractorTrainConfig,
    FeatureExtractor,
    images_to_tensor,
    load_extractor,
    save_extractor,
    train_extractor,
    voxels_to_planes,
)
from .protocol import (
    occupancy_class_histogram,
    palette_class_histogram,
    protocol_cameras,
    render_occ_to_2d,
)
from .report import DEFAULT_METRICS, MetricReport, compute_report, load_samples
from .scores import inception_score, precision_recall
