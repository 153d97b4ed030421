"""Segmentation metrics.

Confusion-matrix accumulation with ignore-label handling, plus the three
standard summaries (global accuracy, class-mean accuracy, class-mean IoU),
all reported as percentages. Matrices merge elementwise so evaluation can
shard across workers and reduce deterministically.
"""

from dataclasses import dataclass, field

import numpy as np

from .events.types import IGNORE_LABEL, ConfigurationError, InputError, SemanticMask

__all__ = ["ConfusionMatrix", "EvaluationError", "accumulate", "summarize"]


class EvaluationError(RuntimeError):
    """A summary was requested where no pixel was ever evaluated."""


@dataclass
class ConfusionMatrix:
    """c x c integer counts, rows ground truth, columns prediction.

    Classes are 1-based on the outside (labels 1..c); row/column i holds
    class i + 1.
    """

    categories: int = 11
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.categories < 2:
            raise ConfigurationError("need at least 2 categories")
        c = self.categories
        if self.counts is None:
            self.counts = np.zeros((c, c), dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts)
            if self.counts.shape != (c, c):
                raise InputError(f"counts must be {c}x{c}")
            if not np.issubdtype(self.counts.dtype, np.integer):
                raise InputError("counts must be integers")
            if (self.counts < 0).any():
                raise InputError("counts must be non-negative")
            self.counts = self.counts.astype(np.int64)

    @property
    def total(self) -> int:
        """Number of evaluated (non-ignore) pixels."""
        return int(self.counts.sum())

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.categories != self.categories:
            raise InputError("cannot merge matrices with different class counts")
        return ConfusionMatrix(self.categories, self.counts + other.counts)


def accumulate(cm: ConfusionMatrix, pred, gt: SemanticMask) -> ConfusionMatrix:
    """Count every pixel whose ground truth is not the ignore value.

    pred may be a raw label array or a SemanticMask; either way predictions
    at counted pixels must lie in 1..c.
    """
    pred_labels = pred.labels if isinstance(pred, SemanticMask) else np.asarray(pred)
    if pred_labels.shape != gt.labels.shape:
        raise InputError("prediction and ground truth shapes differ")
    if not np.issubdtype(pred_labels.dtype, np.integer):
        raise InputError("predictions must be integer labels")
    c = cm.categories
    if gt.categories != c:
        raise InputError("mask categories do not match the matrix")
    valid = gt.labels != IGNORE_LABEL
    p = pred_labels[valid]
    g = gt.labels[valid]
    if p.size and ((p < 1) | (p > c)).any():
        raise InputError(f"prediction labels outside 1..{c}")
    flat = (g.astype(np.int64) - 1) * c + (p.astype(np.int64) - 1)
    cm.counts += np.bincount(flat, minlength=c * c).reshape(c, c)
    return cm


def summarize(cm: ConfusionMatrix) -> dict:
    """gACC, mACC, mIoU as percentages plus the per-class breakdown.

    Class-averaging denominators exclude absent classes: mACC averages over
    classes with ground-truth support, mIoU over classes present in either
    ground truth or prediction.
    """
    if cm.total == 0:
        raise EvaluationError("confusion matrix is empty")
    counts = cm.counts.astype(np.float64)
    diag = np.diag(counts)
    row = counts.sum(axis=1)
    col = counts.sum(axis=0)
    union = row + col - diag

    gacc = float(diag.sum() / counts.sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        acc = np.where(row > 0, diag / np.maximum(row, 1e-300), np.nan)
        iou = np.where(union > 0, diag / np.maximum(union, 1e-300), np.nan)
    macc = float(np.nanmean(acc))
    miou = float(np.nanmean(iou))

    per_class = {}
    for i in range(cm.categories):
        entry = {}
        if row[i] > 0:
            entry["acc"] = 100.0 * float(acc[i])
        if union[i] > 0:
            entry["iou"] = 100.0 * float(iou[i])
        if entry:
            entry["support"] = int(row[i])
            per_class[i + 1] = entry
    return {
        "gACC": 100.0 * gacc,
        "mACC": 100.0 * macc,
        "mIoU": 100.0 * miou,
        "per_class": per_class,
    }
