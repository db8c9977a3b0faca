"""Synthetic reference/production pairs with known P(y=1 | x).

Features are Gaussian, labels follow a logistic concept that is identical in
both periods, and production inputs are shifted and rescaled relative to the
reference. The monitored model's score is ``sigmoid(logit / temperature)``,
where the logit comes from the true concept or, if ``model_coef`` is given,
from a misspecified linear model.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .data_model import DatasetSchema, Role, ScoredDataset
from .errors import ValidationError
from .estimators.metrics import MetricKind, realized_metric
from .learners import logit, sigmoid


def _vec(values, n: int, default: float, name: str) -> tuple[float, ...]:
    if values is None:
        return (default,) * n
    values = tuple(float(v) for v in np.atleast_1d(values))
    if len(values) == 1 and n > 1:
        values = values * n
    if len(values) != n:
        raise ValidationError(f"{name} has {len(values)} entries for {n} features")
    return values


@dataclass(frozen=True)
class ShiftSpec:
    n_features: int
    coef: Sequence[float]
    intercept: float = 0.0
    ref_mean: Optional[Sequence[float]] = None
    ref_std: Optional[Sequence[float]] = None
    shift: Optional[Sequence[float]] = None
    scale: Optional[Sequence[float]] = None
    temperature: float = 1.0
    model_coef: Optional[Sequence[float]] = None
    model_intercept: Optional[float] = None
    n_ref: int = 20000
    n_prod: int = 20000
    seed: int = 0

    def __post_init__(self):
        n = int(self.n_features)
        if n < 1:
            raise ValidationError("n_features must be >= 1")
        object.__setattr__(self, "coef", _vec(self.coef, n, 0.0, "coef"))
        object.__setattr__(self, "ref_mean", _vec(self.ref_mean, n, 0.0, "ref_mean"))
        object.__setattr__(self, "ref_std", _vec(self.ref_std, n, 1.0, "ref_std"))
        object.__setattr__(self, "shift", _vec(self.shift, n, 0.0, "shift"))
        object.__setattr__(self, "scale", _vec(self.scale, n, 1.0, "scale"))
        if self.model_coef is not None:
            object.__setattr__(self, "model_coef", _vec(self.model_coef, n, 0.0, "model_coef"))
        if not self.temperature > 0:
            raise ValidationError("temperature must be positive")
        if min(self.ref_std) <= 0 or min(self.scale) <= 0:
            raise ValidationError("standard deviations and scale multipliers must be positive")
        if self.n_ref < 1 or self.n_prod < 1:
            raise ValidationError("n_ref and n_prod must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ShiftSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown ShiftSpec fields: {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ValidationError(str(exc)) from None

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    def with_(self, **changes) -> "ShiftSpec":
        return replace(self, **changes)

    @property
    def calibrated_model(self) -> bool:
        """True when scores are a monotone function of the true probability."""
        return self.model_coef is None and self.model_intercept is None

    # ------------------------------------------------------------------
    def true_probability(self, x) -> np.ndarray:
        return sigmoid(np.asarray(x, dtype=float) @ np.asarray(self.coef) + self.intercept)

    def model_logit(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        coef = self.coef if self.model_coef is None else self.model_coef
        b = self.intercept if self.model_intercept is None else self.model_intercept
        return x @ np.asarray(coef) + b

    def score(self, x) -> np.ndarray:
        return sigmoid(self.model_logit(x) / self.temperature)

    def oracle_calibration(self, s) -> np.ndarray:
        """P(y=1 | score=s); closed form only for the temperature-only model."""
        if not self.calibrated_model:
            raise ValidationError("the oracle calibration map is closed-form only without model_coef")
        s = np.clip(np.asarray(s, dtype=float), 1e-300, 1 - 1e-16)
        return sigmoid(self.temperature * logit(s))

    def sample_features(self, rng: np.random.Generator, n: int, role: Role) -> np.ndarray:
        mean = np.asarray(self.ref_mean)
        std = np.asarray(self.ref_std)
        if Role(role) is Role.PRODUCTION:
            mean = mean + np.asarray(self.shift)
            std = std * np.asarray(self.scale)
        return mean + std * rng.standard_normal((n, self.n_features))

    def sample(self, rng: np.random.Generator, n: int, role: Role) -> tuple[ScoredDataset, np.ndarray]:
        x = self.sample_features(rng, n, role)
        p = self.true_probability(x)
        y = (rng.random(n) < p).astype(np.int8)
        s = self.score(x)
        data = ScoredDataset(x, s, (s >= 0.5).astype(np.int8), y, Role(role))
        return data, p


@dataclass(frozen=True)
class SyntheticOracle:
    spec: ShiftSpec
    reference_proba: np.ndarray = field(repr=False)
    production_proba: np.ndarray = field(repr=False)

    def true_probability(self, x) -> np.ndarray:
        return self.spec.true_probability(x)

    def calibration(self, s) -> np.ndarray:
        return self.spec.oracle_calibration(s)


def generate(spec: ShiftSpec) -> tuple[ScoredDataset, ScoredDataset, SyntheticOracle]:
    """Draw the reference and production datasets described by ``spec``."""
    ref_seq, prod_seq = np.random.SeedSequence(spec.seed).spawn(2)
    reference, p_ref = spec.sample(np.random.default_rng(ref_seq), spec.n_ref, Role.REFERENCE)
    production, p_prod = spec.sample(np.random.default_rng(prod_seq), spec.n_prod, Role.PRODUCTION)
    return reference, production, SyntheticOracle(spec, p_ref, p_prod)


def true_performance(spec: ShiftSpec, kind, n_mc: int = 100_000, seed: int = 0, n_batches: int = 50) -> tuple[float, float]:
    """Monte-Carlo population metric on the production distribution.

    Returns ``(estimate, standard_error)``; the standard error comes from
    ``n_batches`` equal batches (batch means).
    """
    if n_mc < 10_000:
        raise ValidationError("n_mc must be at least 10000")
    kind = MetricKind(kind)
    data, _ = spec.sample(np.random.default_rng(seed), n_mc, Role.PRODUCTION)
    value = realized_metric(kind, data.labels, data.predictions, data.scores)
    size = n_mc // n_batches
    batch = [
        realized_metric(kind, data.labels[i : i + size], data.predictions[i : i + size], data.scores[i : i + size])
        for i in range(0, size * n_batches, size)
    ]
    return value, float(np.std(batch, ddof=1) / np.sqrt(n_batches))


def default_schema(n_features: int) -> DatasetSchema:
    return DatasetSchema(tuple(f"x{j}" for j in range(n_features)), "score", "prediction", "label")
