"""Score calibration with optional density-ratio weights, plus diagnostics."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, ValidationError
from .learners import MonotoneMap, _as_weights, fit_monotone_map


class CalibrationMode(str, enum.Enum):
    WEIGHTED = "weighted"
    UNWEIGHTED = "unweighted"


@dataclass(frozen=True)
class Calibrator:
    map: MonotoneMap
    mode: CalibrationMode

    def __call__(self, scores) -> np.ndarray:
        return calibrate(self, scores)


@dataclass(frozen=True)
class CalibrationDiagnostics:
    """Binned calibration error.

    ``bin_errors`` holds the weighted mean of ``y - c(s)`` per bin and
    ``bin_mass`` the share of total weight falling in that bin, so
    ``ece == sum(bin_mass * |bin_errors|)``.
    """

    edges: np.ndarray
    bin_errors: np.ndarray
    bin_mass: np.ndarray
    ece: float


def fit_weighted_calibrator(scores_ref, y_ref, weights) -> Calibrator:
    """Fit a monotone calibrator with per-observation weights.

    With density-ratio weights the result approximates the calibration map
    under the production distribution.
    """
    return Calibrator(fit_monotone_map(scores_ref, y_ref, weights), CalibrationMode.WEIGHTED)


def fit_calibrator(scores_ref, y_ref) -> Calibrator:
    """Plain calibrator under the reference distribution (unit weights)."""
    m = fit_monotone_map(scores_ref, y_ref, np.ones(np.shape(scores_ref)[0]))
    return Calibrator(m, CalibrationMode.UNWEIGHTED)


def calibrate(calibrator: Calibrator, scores) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    if not (np.isfinite(s).all() and (s >= 0).all() and (s <= 1).all()):
        raise ValidationError("scores must lie in [0, 1]")
    return calibrator.map(s)


def _equal_frequency_edges(scores: np.ndarray, n_bins: int) -> np.ndarray:
    edges = np.quantile(scores, np.linspace(0.0, 1.0, n_bins + 1))
    edges[0], edges[-1] = 0.0, 1.0
    return np.unique(edges)


def diagnose_calibration(calibrator: Calibrator, scores, y, weights=None, n_bins: int = 10) -> CalibrationDiagnostics:
    """Expected absolute calibration error over equal-frequency score bins."""
    s = np.asarray(scores, dtype=float).ravel()
    if s.shape[0] == 0:
        raise EmptyInputError("calibration diagnostics need at least one labeled row")
    if n_bins < 1:
        raise ValidationError("n_bins must be >= 1")
    y = np.asarray(y, dtype=float).ravel()
    if y.shape != s.shape:
        raise ValidationError("scores and labels differ in length")
    w = _as_weights(weights, s.shape[0])
    resid = y - calibrate(calibrator, s)

    edges = _equal_frequency_edges(s, n_bins)
    # right-closed interior bins, first bin also takes the minimum
    idx = np.clip(np.searchsorted(edges, s, side="left") - 1, 0, len(edges) - 2)
    nb = len(edges) - 1
    mass = np.bincount(idx, weights=w, minlength=nb)
    err_sum = np.bincount(idx, weights=w * resid, minlength=nb)
    occupied = mass > 0
    errors = np.zeros(nb)
    errors[occupied] = err_sum[occupied] / mass[occupied]
    mass = mass / w.sum()
    return CalibrationDiagnostics(edges, errors, mass, float(np.sum(mass * np.abs(errors))))
