"""Gaussian-primitive rendering and geometric conditioning embeddings."""

from .embedding import (
    DegenerateBoxError,
    GeoEmbeddingFuser,
    SceneCoordsEmbedder,
    box_coordinate_lattice,
)
from .gaussians import (
    GaussianPrimitiveSet,
    depth_to_disparity,
    rasterize,
    voxels_to_gaussians,
)
from .pngio import (
    DISPARITY_SCALE,
    read_disparity_png,
    read_rgb_png,
    read_semantic_png,
    write_disparity_png,
    write_rgb_png,
    write_semantic_png,
)
