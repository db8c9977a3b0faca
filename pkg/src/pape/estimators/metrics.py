"""Realized classification metrics, optionally weighted.

Every metric is computed from (possibly fractional) confusion-matrix masses
so that the same code serves realized metrics (0/1 masses), importance
weighted metrics, and expected confusion matrices built from calibrated
probabilities.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import UndefinedMetricError, UndefinedMetricWarning, ValidationError


class MetricKind(str, enum.Enum):
    ACCURACY = "accuracy"
    F1 = "f1"
    PRECISION = "precision"
    RECALL = "recall"
    AUROC = "auroc"


@dataclass(frozen=True)
class ConfusionMasses:
    """Confusion-matrix masses; normalized ones are per-observation rates."""

    tp: float
    fp: float
    tn: float
    fn: float

    @property
    def total(self) -> float:
        return self.tp + self.fp + self.tn + self.fn

    def normalized(self) -> "ConfusionMasses":
        t = self.total
        return ConfusionMasses(self.tp / t, self.fp / t, self.tn / t, self.fn / t)


def _ratio(num: float, den: float, name: str) -> float:
    if den <= 0.0:
        warnings.warn(f"{name} is undefined (zero denominator); reporting 0", UndefinedMetricWarning, stacklevel=3)
        return 0.0
    return num / den


def metric_from_confusion(kind: MetricKind, cm: ConfusionMasses) -> float:
    kind = MetricKind(kind)
    if kind is MetricKind.ACCURACY:
        return (cm.tp + cm.tn) / cm.total
    if kind is MetricKind.PRECISION:
        return _ratio(cm.tp, cm.tp + cm.fp, "precision")
    if kind is MetricKind.RECALL:
        return _ratio(cm.tp, cm.tp + cm.fn, "recall")
    if kind is MetricKind.F1:
        return _ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn, "F1")
    raise ValidationError(f"{kind.value} is not a confusion-matrix metric")


def weighted_auc(scores, pos_mass, neg_mass) -> float:
    """Area under the ROC curve with fractional class membership.

    Row ``i`` contributes ``pos_mass[i]`` to the positive class and
    ``neg_mass[i]`` to the negative class. The curve is swept over every
    distinct score as threshold (``score >= t`` means positive) and
    integrated with the trapezoid rule from (0, 0) to (1, 1). With 0/1
    masses this equals the Mann-Whitney statistic with ties counted as 1/2.
    """
    s = np.asarray(scores, dtype=float).ravel()
    pos = np.asarray(pos_mass, dtype=float).ravel()
    neg = np.asarray(neg_mass, dtype=float).ravel()
    if not (s.shape == pos.shape == neg.shape):
        raise ValidationError("scores and class masses differ in length")
    P, N = pos.sum(), neg.sum()
    if P <= 0.0 or N <= 0.0:
        raise UndefinedMetricError("AUROC needs positive mass in both classes")
    uniq, inverse = np.unique(-s, return_inverse=True)
    pos_g = np.bincount(inverse, weights=pos, minlength=uniq.shape[0])
    neg_g = np.bincount(inverse, weights=neg, minlength=uniq.shape[0])
    tp_before = np.concatenate([[0.0], np.cumsum(pos_g)[:-1]])
    return float(np.sum(neg_g * (tp_before + 0.5 * pos_g)) / (P * N))


def confusion_masses(labels, predictions, weights=None) -> ConfusionMasses:
    y = np.asarray(labels, dtype=float).ravel()
    g = np.asarray(predictions, dtype=float).ravel()
    if y.shape != g.shape:
        raise ValidationError("labels and predictions differ in length")
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float).ravel()
    return ConfusionMasses(
        tp=float(np.sum(w * y * g)),
        fp=float(np.sum(w * (1 - y) * g)),
        tn=float(np.sum(w * (1 - y) * (1 - g))),
        fn=float(np.sum(w * y * (1 - g))),
    )


def realized_metric(kind: MetricKind, labels, predictions, scores=None, weights: Optional[np.ndarray] = None) -> float:
    """Metric of the monitored model on labeled data.

    ``weights`` turns every count into a weighted sum (importance weighting).
    AUROC uses ``scores``; the other kinds use ``predictions``.
    """
    kind = MetricKind(kind)
    if labels is None:
        raise ValidationError("realized metrics need labels")
    y = np.asarray(labels, dtype=float).ravel()
    if y.shape[0] == 0:
        raise ValidationError("realized metrics need at least one row")
    if weights is not None:
        weights = np.asarray(weights, dtype=float).ravel()
        if weights.shape != y.shape:
            raise ValidationError("weights and labels differ in length")
    if kind is MetricKind.AUROC:
        if scores is None:
            raise ValidationError("AUROC needs scores")
        w = np.ones_like(y) if weights is None else weights
        return weighted_auc(scores, w * y, w * (1.0 - y))
    if kind is MetricKind.ACCURACY and weights is None:
        return float(np.mean(y == np.asarray(predictions, dtype=float).ravel()))
    return metric_from_confusion(kind, confusion_masses(y, predictions, weights))


def metric_of(kind: MetricKind, data, weights=None) -> float:
    """:func:`realized_metric` on anything exposing labels/predictions/scores."""
    return realized_metric(kind, data.labels, data.predictions, data.scores, weights)
