"""Sample-quality scores: inception score and k-NN precision/recall/F."""

from __future__ import annotations

import warnings

import numpy as np

from .distances import FeatureSet

SIMPLEX_ATOL = 1e-6


def inception_score(probs: np.ndarray) -> float:
    """exp(mean KL(p_i || marginal)) over class-probability rows."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("probs must be (n, classes)")
    if np.any(p < -SIMPLEX_ATOL) or np.any(np.abs(p.sum(axis=1) - 1.0) > SIMPLEX_ATOL):
        raise ValueError("rows must be probability distributions summing to 1")
    p = np.clip(p, 0.0, None)
    marginal = p.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log(p) - np.log(marginal)), 0.0)
    kl = terms.sum(axis=1)
    return float(np.exp(kl.mean()))


def _knn_radii(points: np.ndarray, k: int) -> np.ndarray:
    """Distance to each point's k-th nearest neighbor within its own set."""
    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1)
    np.fill_diagonal(d2, np.inf)
    sorted_d2 = np.sort(d2, axis=1)
    return np.sqrt(sorted_d2[:, k - 1])


def precision_recall(
    real: FeatureSet, gen: FeatureSet, k: int = 3
) -> tuple[float, float, float]:
    """k-NN support overlap: fraction of generated samples inside the real
    support, fraction of real samples inside the generated support, and the
    harmonic mean of the two."""
    if k < 1 or k >= min(real.n, gen.n):
        raise ValueError(f"k must satisfy 1 <= k < min(n_real, n_gen), got {k}")
    if real.dim != gen.dim:
        raise ValueError("feature dimensions differ")
    real_radii = _knn_radii(real.features, k)
    gen_radii = _knn_radii(gen.features, k)
    if real_radii.min() == 0.0 or gen_radii.min() == 0.0:
        warnings.warn("duplicate points give zero k-NN radii", stacklevel=2)

    cross = np.sqrt(
        ((gen.features[:, None, :] - real.features[None, :, :]) ** 2).sum(axis=-1)
    )
    precision = float((cross <= real_radii[None, :]).any(axis=1).mean())
    recall = float((cross.T <= gen_radii[None, :]).any(axis=1).mean())
    if precision + recall == 0.0:
        f_score = 0.0
    else:
        f_score = 2.0 * precision * recall / (precision + recall)
    return precision, recall, float(f_score)
