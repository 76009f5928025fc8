"""Metric report assembly over directories of artifacts."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..render.pngio import read_rgb_png
from ..scene.io import load_occupancy
from ..scene.world import OccupancyGrid
from .distances import FeatureSet, frechet_distance, kernel_distance
from .features import FeatureExtractor
from .protocol import occupancy_class_histogram, palette_class_histogram
from .scores import inception_score, precision_recall


@dataclass
class MetricReport:
    n_real: int
    n_gen: int
    extractor_id: str
    inception: float | None = None
    fid: float | None = None
    kid_mean: float | None = None
    kid_std: float | None = None
    precision: float | None = None
    recall: float | None = None
    f_score: float | None = None

    def __post_init__(self):
        for name in ("precision", "recall", "f_score"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if (
            self.precision not in (None, 0.0)
            and self.recall not in (None, 0.0)
            and self.f_score is not None
        ):
            expected = 2 * self.precision * self.recall / (self.precision + self.recall)
            if abs(self.f_score - expected) > 1e-9:
                raise ValueError("f_score must be the harmonic mean of P and R")

    def to_doc(self) -> dict:
        return {"schema": "metric_report/1", **asdict(self)}


DEFAULT_METRICS = ("fid", "kid", "is", "prf")


def load_samples(directory: Path | str) -> tuple[list, str]:
    """Load .occ volumes or PNG images from a directory; returns (items, kind)."""
    directory = Path(directory)
    occ_files = sorted(directory.glob("*.occ"))
    if occ_files:
        return [load_occupancy(p) for p in occ_files], "voxel"
    png_files = sorted(directory.glob("*.png"))
    if png_files:
        return [read_rgb_png(p) for p in png_files], "image"
    raise FileNotFoundError(f"no .occ or .png samples in {directory}")


def compute_report(
    real_items: list,
    gen_items: list,
    kind: str,
    extractor: FeatureExtractor,
    metrics: tuple[str, ...] = DEFAULT_METRICS,
    palette: dict[int, tuple[int, int, int]] | None = None,
    knn_k: int = 3,
    kid_subset_size: int | None = None,
    kid_subsets: int = 10,
    seed: int = 0,
) -> MetricReport:
    if kind == "voxel":
        real = extractor.extract_grids(real_items, source="real")
        gen = extractor.extract_grids(gen_items, source="generated")
    else:
        real = extractor.extract_images(np.stack(real_items), source="real")
        gen = extractor.extract_images(np.stack(gen_items), source="generated")
    report = MetricReport(n_real=real.n, n_gen=gen.n, extractor_id=extractor.extractor_id)
    if "fid" in metrics:
        report.fid = frechet_distance(real, gen)
    if "kid" in metrics:
        subset = kid_subset_size or max(2, min(real.n, gen.n) // 2)
        report.kid_mean, report.kid_std = kernel_distance(
            real, gen, subset_size=subset, subsets=kid_subsets, seed=seed
        )
    if "is" in metrics:
        if kind == "voxel":
            rows = np.stack([occupancy_class_histogram(g) for g in gen_items])
        else:
            if palette is None:
                raise ValueError("palette required for image inception score")
            rows = np.stack([palette_class_histogram(im, palette) for im in gen_items])
        report.inception = inception_score(rows)
    if "prf" in metrics:
        p, r, f = precision_recall(real, gen, k=knn_k)
        report.precision, report.recall, report.f_score = p, r, f
    return report
