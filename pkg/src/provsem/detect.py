"""Verdicts from a trained Siamese model.

Two decision surfaces: pair classification against a calibrated distance
threshold, and event classification against labeled reference events
(mean distance to the k nearest references on each side, smaller side
wins, benign on ties).
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DataError, UncalibratedModelError
from .pairs import PairDataset
from .siamese import SiameseModel, forward_subnet, pair_distance

logger = logging.getLogger(__name__)


@dataclass
class ReferenceSet:
    """Labeled anchor events the detector compares unseen events against."""

    benign: np.ndarray
    adversarial: np.ndarray
    k: int = 5
    benign_ids: tuple = ()
    adversarial_ids: tuple = ()

    def __post_init__(self):
        self.benign = np.atleast_2d(np.asarray(self.benign, dtype=np.float64))
        self.adversarial = np.atleast_2d(np.asarray(self.adversarial, dtype=np.float64))
        if len(self.benign) == 0 or len(self.adversarial) == 0:
            raise DataError("reference set needs both benign and adversarial entries")
        if self.k < 1:
            raise DataError("k must be >= 1")
        if not self.benign_ids:
            self.benign_ids = tuple("b%d" % i for i in range(len(self.benign)))
        if not self.adversarial_ids:
            self.adversarial_ids = tuple("a%d" % i for i in range(len(self.adversarial)))
        if len(self.benign_ids) != len(self.benign) or len(
            self.adversarial_ids
        ) != len(self.adversarial):
            raise DataError("reference ids do not match reference vectors")


@dataclass(frozen=True)
class Verdict:
    decision: str
    score: float
    benign_refs: tuple
    adversarial_refs: tuple


def calibrate_threshold(model: SiameseModel, val: PairDataset) -> float:
    """Pick the pair-decision threshold maximizing F1 on validation pairs.

    Candidates are the midpoints of the sorted validation distances;
    positive class is 'dissimilar' (distance above threshold).  Ties go
    to the smaller threshold.
    """
    if len(val) == 0:
        raise DataError("validation set is empty")
    y = val.y.astype(bool)
    if y.all() or not y.any():
        raise DataError("validation set must contain both pair classes")
    d = pair_distance(model.params, val.a, val.b, model.final_activation)
    d_sorted = np.sort(d)
    if d_sorted[0] == d_sorted[-1]:
        raise DataError("degenerate validation distances: all pairs are equidistant")
    candidates = np.unique((d_sorted[:-1] + d_sorted[1:]) / 2.0)

    best_tau, best_f1 = None, -1.0
    for tau in candidates:
        predicted = d > tau
        tp = int((predicted & y).sum())
        fp = int((predicted & ~y).sum())
        fn = int((~predicted & y).sum())
        f1 = 2.0 * tp / (2.0 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
        if f1 > best_f1:
            best_tau, best_f1 = float(tau), f1
    return best_tau


def classify_pair(model: SiameseModel, a, b) -> str:
    """'dissimilar' when the pair distance exceeds the calibrated threshold.

    The boundary itself counts as similar, biasing ties away from false
    alarms.
    """
    if model.threshold is None:
        raise UncalibratedModelError("calibrate_threshold must run before classify_pair")
    d = float(pair_distance(model.params, a, b, model.final_activation))
    return "dissimilar" if d > model.threshold else "similar"


def _side_distance(feature, side_features, ids, k):
    distances = np.linalg.norm(side_features - feature, axis=1)
    take = min(k, len(distances))
    nearest = np.argsort(distances, kind="stable")[:take]
    return float(distances[nearest].mean()), tuple(ids[i] for i in nearest)


def classify_event(model: SiameseModel, refs: ReferenceSet, x) -> Verdict:
    """Compare one event against both reference sides; smaller mean wins.

    Exact ties go to benign.  Uses all available references (with a
    warning) when a side holds fewer than k.
    """
    if len(refs.benign) < refs.k or len(refs.adversarial) < refs.k:
        logger.warning(
            "reference side smaller than k=%d; using all available references", refs.k
        )
    feat = forward_subnet(model.params, np.asarray(x, dtype=np.float64), model.final_activation)
    benign_feat = forward_subnet(model.params, refs.benign, model.final_activation)
    adv_feat = forward_subnet(model.params, refs.adversarial, model.final_activation)
    d_benign, benign_ids = _side_distance(feat, benign_feat, refs.benign_ids, refs.k)
    d_adv, adv_ids = _side_distance(feat, adv_feat, refs.adversarial_ids, refs.k)
    decision = "adversarial" if d_adv < d_benign else "benign"
    return Verdict(
        decision=decision,
        score=d_adv - d_benign,
        benign_refs=benign_ids,
        adversarial_refs=adv_ids,
    )


def classify_events(model: SiameseModel, refs: ReferenceSet, xs):
    """Classify a batch of event vectors; returns a list of Verdicts."""
    return [classify_event(model, refs, x) for x in np.atleast_2d(np.asarray(xs))]
