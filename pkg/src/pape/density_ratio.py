"""Density-ratio estimation by discriminating production from reference inputs."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CoverageWarning, ValidationError
from .learners import ProbClassifier, _as_matrix, fit_prob_classifier

DEFAULT_WEIGHT_CLIP = 50.0
COVERAGE_PROBA = 0.99
COVERAGE_FRACTION = 0.01


@dataclass(frozen=True)
class DensityRatioModel:
    classifier: ProbClassifier
    n_ref: int
    n_prod: int
    weight_clip: float = DEFAULT_WEIGHT_CLIP
    # share of production rows the classifier places at P(z=1|x) > 0.99
    uncovered_fraction: float = 0.0

    @property
    def prior_ratio(self) -> float:
        return self.n_ref / self.n_prod

    def production_proba(self, x) -> np.ndarray:
        """Clipped classifier estimate of P(z=1 | x), z=1 meaning production."""
        return self.classifier.predict_proba(x)

    def raw_weights(self, x) -> np.ndarray:
        p = self.production_proba(x)
        return self.prior_ratio * p / (1.0 - p)

    def weights(self, x) -> np.ndarray:
        return np.minimum(self.raw_weights(x), self.weight_clip)


def fit_dre(x_ref, x_prod, *, weight_clip: float = DEFAULT_WEIGHT_CLIP, **fit_kwargs) -> DensityRatioModel:
    """Fit the reference-vs-production classifier.

    Reference rows get label 0 and production rows label 1. Emits a
    :class:`CoverageWarning` when more than 1% of production rows look
    unsupported by the reference sample.
    """
    x_ref = _as_matrix(x_ref)
    x_prod = _as_matrix(x_prod)
    if x_ref.shape[0] == 0 or x_prod.shape[0] == 0:
        raise ValidationError("both samples must be non-empty")
    if x_ref.shape[1] != x_prod.shape[1]:
        raise ValidationError(
            f"column mismatch: reference has {x_ref.shape[1]} features, production {x_prod.shape[1]}"
        )
    if weight_clip <= 0:
        raise ValidationError("weight_clip must be positive")
    x = np.vstack([x_ref, x_prod])
    z = np.concatenate([np.zeros(x_ref.shape[0]), np.ones(x_prod.shape[0])])
    clf = fit_prob_classifier(x, z, **fit_kwargs)
    uncovered = float(np.mean(clf.predict_proba(x_prod) > COVERAGE_PROBA))
    if uncovered > COVERAGE_FRACTION:
        warnings.warn(
            f"{uncovered:.1%} of production rows have P(production|x) > {COVERAGE_PROBA}; "
            "they lie where the reference data gives little support",
            CoverageWarning,
            stacklevel=2,
        )
    return DensityRatioModel(clf, x_ref.shape[0], x_prod.shape[0], weight_clip, uncovered)


def estimate_weights(model: DensityRatioModel, x) -> np.ndarray:
    """Density ratios ``(n_ref / n_prod) * p / (1 - p)`` capped at ``model.weight_clip``."""
    return model.weights(x)


def clipped_fraction(model: DensityRatioModel, x) -> float:
    return float(np.mean(model.raw_weights(x) > model.weight_clip))


def discrimination_auroc(model: DensityRatioModel, x_ref, x_prod) -> float:
    """In-sample AUROC of the classifier separating the two samples."""
    from .estimators.metrics import weighted_auc

    p = np.concatenate([model.production_proba(x_ref), model.production_proba(x_prod)])
    z = np.concatenate([np.zeros(len(x_ref)), np.ones(len(x_prod))])
    return weighted_auc(p, z, 1.0 - z)
