"""Metric estimates from calibrated probabilities, without labels."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import UndefinedMetricError, ValidationError
from .metrics import ConfusionMasses, MetricKind, metric_from_confusion, weighted_auc


def _check_probs(cal_probs, other, name: str):
    c = np.asarray(cal_probs, dtype=float).ravel()
    o = np.asarray(other, dtype=float).ravel()
    if c.shape != o.shape:
        raise ValidationError(f"calibrated probabilities and {name} differ in length")
    if c.shape[0] == 0:
        raise ValidationError("need at least one observation")
    if not ((c >= 0) & (c <= 1)).all():
        raise ValidationError("calibrated probabilities must lie in [0, 1]")
    return c, o


def expected_pointwise(cal_probs, predictions, m: Callable[[np.ndarray, int], np.ndarray]) -> float:
    """Mean over rows of ``c * m(g, 1) + (1 - c) * m(g, 0)``.

    ``m(g, y)`` returns the observation-level metric of predictions ``g``
    against a constant label ``y``.
    """
    c, g = _check_probs(cal_probs, predictions, "predictions")
    return float(np.mean(c * m(g, 1) + (1.0 - c) * m(g, 0)))


def _correct(g: np.ndarray, y: int) -> np.ndarray:
    return (g == y).astype(float)


def estimate_accuracy(cal_probs, predictions) -> float:
    return expected_pointwise(cal_probs, predictions, _correct)


def _expected_masses(c: np.ndarray, g: np.ndarray) -> ConfusionMasses:
    # summed (not averaged) so ratio metrics match realized ones bit-for-bit
    return ConfusionMasses(
        tp=float(np.sum(c * g)),
        fp=float(np.sum((1.0 - c) * g)),
        tn=float(np.sum((1.0 - c) * (1.0 - g))),
        fn=float(np.sum(c * (1.0 - g))),
    )


def estimate_confusion(cal_probs, predictions) -> ConfusionMasses:
    """Expected per-observation confusion rates.

    ``c`` is read as P(y=1), so a negative prediction is a false negative
    with probability ``c`` and a true negative with probability ``1 - c``.
    """
    c, g = _check_probs(cal_probs, predictions, "predictions")
    m = _expected_masses(c, g)
    n = c.shape[0]
    return ConfusionMasses(m.tp / n, m.fp / n, m.tn / n, m.fn / n)


def estimate_auroc(cal_probs, scores) -> float:
    """AUROC of ``scores`` with expected class memberships ``c`` and ``1 - c``."""
    c, s = _check_probs(cal_probs, scores, "scores")
    if c.sum() <= 0.0 or (1.0 - c).sum() <= 0.0:
        raise UndefinedMetricError("calibrated probabilities are all 0 or all 1; AUROC is undefined")
    return weighted_auc(s, c, 1.0 - c)


def estimate_metric(kind: MetricKind, cal_probs, predictions, scores) -> float:
    """Label-free estimate of ``kind`` from calibrated probabilities."""
    kind = MetricKind(kind)
    if kind is MetricKind.ACCURACY:
        return estimate_accuracy(cal_probs, predictions)
    if kind is MetricKind.AUROC:
        return estimate_auroc(cal_probs, scores)
    c, g = _check_probs(cal_probs, predictions, "predictions")
    return metric_from_confusion(kind, _expected_masses(c, g))
