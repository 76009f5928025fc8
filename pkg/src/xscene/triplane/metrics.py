"""Occupancy reconstruction quality: binary IoU and per-class mIoU."""

from __future__ import annotations

import numpy as np

from ..scene.world import OccupancyGrid


def reconstruct_metrics(pred: OccupancyGrid, gt: OccupancyGrid) -> tuple[float, float]:
    """(IoU, mIoU): occupied-vs-free IoU and the mean per-class IoU over
    non-free classes present in the ground truth."""
    if pred.labels.shape != gt.labels.shape:
        raise ValueError(
            f"grid shape mismatch: {pred.labels.shape} vs {gt.labels.shape}"
        )
    pred_occ = pred.labels != 0
    gt_occ = gt.labels != 0
    union = np.logical_or(pred_occ, gt_occ).sum()
    inter = np.logical_and(pred_occ, gt_occ).sum()
    iou = 1.0 if union == 0 else float(inter / union)

    class_ious = []
    for c in np.unique(gt.labels):
        if c == 0:
            continue
        p = pred.labels == c
        g = gt.labels == c
        u = np.logical_or(p, g).sum()
        i = np.logical_and(p, g).sum()
        class_ious.append(float(i / u) if u else 1.0)
    miou = float(np.mean(class_ious)) if class_ious else 0.0
    return iou, miou
