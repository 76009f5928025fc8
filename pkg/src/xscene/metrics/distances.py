"""Distribution distances over feature sets: Frechet and kernel variants."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

EIG_CLIP_TOL = -1e-8


@dataclass(frozen=True)
class FeatureSet:
    features: np.ndarray  # (n, d)
    extractor_id: str = ""
    source: str = ""  # "real" | "generated"

    def __post_init__(self):
        f = np.ascontiguousarray(self.features, dtype=np.float64)
        if f.ndim != 2:
            raise ValueError(f"features must be (n, d), got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("features must be finite")
        f.flags.writeable = False
        object.__setattr__(self, "features", f)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def _sym_sqrt(mat: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition, tiny negatives clipped."""
    sym = (mat + mat.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    if vals.min(initial=0.0) < EIG_CLIP_TOL:
        raise ValueError(f"matrix has significantly negative eigenvalue {vals.min()}")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(a: FeatureSet, b: FeatureSet) -> float:
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)).

    The cross term uses the stable symmetric form
    Tr((S_a^(1/2) S_b S_a^(1/2))^(1/2)).
    """
    if a.n < 2 or b.n < 2:
        raise ValueError("need at least two samples per set")
    if a.dim != b.dim:
        raise ValueError("feature dimensions differ")
    if min(a.n, b.n) < 2 * a.dim:
        warnings.warn(
            f"sample count {min(a.n, b.n)} below 2x feature dim {a.dim}; "
            "covariance estimates will be noisy",
            stacklevel=2,
        )
    mu_a = a.features.mean(axis=0)
    mu_b = b.features.mean(axis=0)
    cov_a = np.cov(a.features, rowvar=False).reshape(a.dim, a.dim)
    cov_b = np.cov(b.features, rowvar=False).reshape(b.dim, b.dim)
    root_a = _sym_sqrt(cov_a)
    cross = _sym_sqrt(root_a @ cov_b @ root_a)
    value = float(
        np.sum((mu_a - mu_b) ** 2) + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(cross)
    )
    return value


def poly3_kernel_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = x.shape[1]
    return (x @ y.T / d + 1.0) ** 3


def mmd2_unbiased(x: np.ndarray, y: np.ndarray) -> float:
    """Unbiased squared MMD with the cubic polynomial kernel."""
    m, n = x.shape[0], y.shape[0]
    if m < 2 or n < 2:
        raise ValueError("need at least two samples per set")
    kxx = poly3_kernel_matrix(x, x)
    kyy = poly3_kernel_matrix(y, y)
    kxy = poly3_kernel_matrix(x, y)
    sum_xx = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
    sum_yy = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
    sum_xy = kxy.mean()
    return float(sum_xx + sum_yy - 2.0 * sum_xy)


def kernel_distance(
    a: FeatureSet,
    b: FeatureSet,
    subset_size: int = 50,
    subsets: int = 10,
    seed: int = 0,
) -> tuple[float, float]:
    """(mean, std) of the unbiased MMD^2 over random equal-size subsets."""
    if subset_size < 2:
        raise ValueError("subset_size must be >= 2")
    if subset_size > min(a.n, b.n):
        raise ValueError(
            f"subset_size {subset_size} exceeds smaller set size {min(a.n, b.n)}"
        )
    if a.dim != b.dim:
        raise ValueError("feature dimensions differ")
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(subsets):
        ia = rng.choice(a.n, size=subset_size, replace=False)
        ib = rng.choice(b.n, size=subset_size, replace=False)
        values.append(mmd2_unbiased(a.features[ia], b.features[ib]))
    return float(np.mean(values)), float(np.std(values))
