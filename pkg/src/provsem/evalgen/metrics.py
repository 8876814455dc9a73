"""Pair-level classification metrics.

The positive class is the dissimilar pair: predicting 'dissimilar' is
what flags an attack, so a false positive is a similar pair wrongly
called dissimilar.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import DataError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise DataError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionCounts":
        """Count outcomes with 1 = dissimilar as the positive class."""
        truth = np.asarray(y_true).astype(bool)
        pred = np.asarray(y_pred).astype(bool)
        if truth.shape != pred.shape:
            raise DataError("prediction and truth lengths differ")
        return cls(
            tp=int((pred & truth).sum()),
            fp=int((pred & ~truth).sum()),
            fn=int((~pred & truth).sum()),
            tn=int((~pred & ~truth).sum()),
        )


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    precision_defined: bool = True
    recall_defined: bool = True


def compute_metrics(counts: ConfusionCounts) -> Metrics:
    """Precision/recall/F1/accuracy; undefined ratios become 0 and are flagged."""
    if counts.total == 0:
        raise DataError("cannot compute metrics over zero pairs")
    precision_defined = (counts.tp + counts.fp) > 0
    recall_defined = (counts.tp + counts.fn) > 0
    precision = counts.tp / (counts.tp + counts.fp) if precision_defined else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if recall_defined else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    accuracy = (counts.tp + counts.tn) / counts.total
    return Metrics(
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=accuracy,
        precision_defined=precision_defined,
        recall_defined=recall_defined,
    )
