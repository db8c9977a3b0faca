"""Label-free performance estimators.

Each estimator is fitted once on labeled reference data and then produces
one estimate per production chunk::

    est = PAPE().fit(reference, kinds=["accuracy", "f1"])
    est.estimate("accuracy", chunk)

``reference`` is a :class:`~pape.data_model.ScoredDataset` with labels; a
chunk is anything exposing ``features``, ``scores`` and ``predictions``.
"""

from __future__ import annotations

import threading
import warnings
from collections import OrderedDict
from typing import Callable, Iterable, Optional

import numpy as np

from ..calibration import Calibrator, calibrate, fit_calibrator, fit_weighted_calibrator
from ..data_model import ScoredDataset, split_chunks
from ..density_ratio import DEFAULT_WEIGHT_CLIP, DensityRatioModel, estimate_weights, fit_dre
from ..errors import (
    DegenerateTargetError,
    FallbackWarning,
    SingularFitError,
    SmallSampleWarning,
    UndefinedMetricError,
    ValidationError,
    quiet,
)
from ..learners import fit_line, fit_prob_classifier, sigmoid
from .metrics import MetricKind, metric_of, realized_metric
from .reconstruction import estimate_metric

ALL_KINDS = tuple(MetricKind)
MIN_CHUNK_ROWS = 10
MIN_EFFECTIVE_SAMPLE = 10.0


def max_confidence(scores) -> np.ndarray:
    """Confidence in the predicted class: ``s`` if ``s >= 0.5`` else ``1 - s``."""
    s = np.asarray(scores, dtype=float)
    return np.where(s >= 0.5, s, 1.0 - s)


def _require_labels(reference) -> None:
    if reference.labels is None:
        raise ValidationError("reference data must carry labels")


def _kinds(kinds: Optional[Iterable]) -> tuple[MetricKind, ...]:
    return ALL_KINDS if kinds is None else tuple(MetricKind(k) for k in kinds)


class ChunkCache:
    """Per-chunk memo shared across metric kinds.

    Warnings raised while building an entry are replayed on every lookup, so
    callers see the same flags whether or not the entry was cached.
    """

    def __init__(self, maxsize: int = 8):
        self.maxsize = maxsize
        self._entries: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key, factory: Callable):
        with self._lock:
            hit = self._entries.get(key)
        if hit is None:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                value = factory()
            hit = (value, [(w.message, w.category) for w in caught])
            with self._lock:
                self._entries[key] = hit
                while len(self._entries) > self.maxsize:
                    self._entries.popitem(last=False)
        value, caught = hit
        for message, category in caught:
            warnings.warn(message, category, stacklevel=2)
        return value

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()


def _chunk_key(chunk):
    key = getattr(chunk, "key", None)
    return key if key is not None else id(chunk)


class Estimator:
    name = "base"

    def fit(self, reference: ScoredDataset, kinds=None, **_) -> "Estimator":
        _require_labels(reference)
        self.reference = reference
        self.kinds = _kinds(kinds)
        self.reference_values = {}
        for kind in self.kinds:
            with quiet():
                self.reference_values[kind] = metric_of(kind, reference)
        return self

    def estimate(self, kind, chunk) -> float:
        raise NotImplementedError

    def _fallback(self, kind: MetricKind, reason: str) -> float:
        warnings.warn(f"{self.name}: {reason}; using the reference value", FallbackWarning, stacklevel=3)
        return self.reference_values[kind]


class TestSet(Estimator):
    """Constant estimate equal to the metric on reference data."""

    name = "testset"
    __test__ = False

    def estimate(self, kind, chunk) -> float:
        return self.reference_values[MetricKind(kind)]


def atc_threshold(mc_reference, target: float) -> float:
    """Threshold whose strict exceedance fraction on ``mc_reference`` is closest to ``target``.

    Candidates are ``-inf`` and every distinct value; on ties the lowest
    candidate wins.
    """
    mc = np.sort(np.asarray(mc_reference, dtype=float))
    candidates = np.concatenate([[-np.inf], np.unique(mc)])
    above = 1.0 - np.searchsorted(mc, candidates, side="right") / mc.shape[0]
    return float(candidates[int(np.argmin(np.abs(above - target)))])


class ATC(Estimator):
    """Average threshold confidence applied to every metric kind."""

    name = "atc"

    def fit(self, reference, kinds=None, **kw):
        super().fit(reference, kinds)
        mc = max_confidence(reference.scores)
        self.thresholds = {k: atc_threshold(mc, self.reference_values[k]) for k in self.kinds}
        return self

    def estimate(self, kind, chunk) -> float:
        return float(np.mean(max_confidence(chunk.scores) > self.thresholds[MetricKind(kind)]))


class DoC(Estimator):
    """Difference of confidence: linear map from mean-confidence change to metric change.

    Shifted datasets are simulated by tilted resampling of the reference:
    each resample draws ``sample_size`` rows with probability proportional to
    ``sigmoid(lam * (MC - median MC))`` for ``lam ~ U(lambda_range)``.
    """

    name = "doc"

    def __init__(self, n_resamples: int = 50, lambda_range: tuple[float, float] = (-3.0, 3.0), seed: int = 0):
        self.n_resamples = n_resamples
        self.lambda_range = lambda_range
        self.seed = seed

    def fit(self, reference, kinds=None, chunk_size: int = 2000, **kw):
        super().fit(reference, kinds)
        rng = np.random.default_rng(self.seed)
        mc = max_confidence(reference.scores)
        self.reference_mc = float(mc.mean())
        centered = mc - np.median(mc)
        pairs = {k: ([], []) for k in self.kinds}
        for _ in range(self.n_resamples):
            lam = rng.uniform(*self.lambda_range)
            p = sigmoid(lam * centered)
            idx = rng.choice(reference.n_rows, size=chunk_size, replace=True, p=p / p.sum())
            sample = reference.take(idx)
            dmc = float(mc[idx].mean()) - self.reference_mc
            for kind in self.kinds:
                try:
                    with quiet():
                        dm = metric_of(kind, sample) - self.reference_values[kind]
                except UndefinedMetricError:
                    continue
                pairs[kind][0].append(dmc)
                pairs[kind][1].append(dm)
        self.models = {}
        for kind, (u, v) in pairs.items():
            try:
                self.models[kind] = fit_line(u, v)
            except SingularFitError:
                self.models[kind] = None
        return self

    def estimate(self, kind, chunk) -> float:
        kind = MetricKind(kind)
        model = self.models[kind]
        if model is None:
            return self._fallback(kind, "resampled confidence means are all equal")
        dmc = float(max_confidence(chunk.scores).mean()) - self.reference_mc
        return float(np.clip(self.reference_values[kind] + model.predict(dmc), 0.0, 1.0))


class RTMod(Estimator):
    """Reverse testing with an additive bias correction.

    A reverse classifier is trained on the chunk with the monitored model's
    predictions as targets and scored on the labeled reference data. The bias
    constant is the mean gap between realized and reverse-tested metrics over
    disjoint chunk-sized slices of the reference.
    """

    name = "rtmod"

    def __init__(self, cache_size: int = 8):
        self._cache = ChunkCache(cache_size)

    def _reverse_proba(self, chunk) -> Optional[np.ndarray]:
        preds = np.asarray(chunk.predictions)
        if preds.min() == preds.max():
            return None
        try:
            model = fit_prob_classifier(chunk.features, preds)
        except DegenerateTargetError:
            return None
        return model.predict_proba(self.reference.features)

    def _raw(self, kind: MetricKind, proba: np.ndarray) -> float:
        labels = self.reference.labels
        if kind is MetricKind.AUROC:
            return realized_metric(kind, labels, None, scores=proba)
        return realized_metric(kind, labels, (proba >= 0.5).astype(np.int8))

    def fit(self, reference, kinds=None, chunk_size: int = 2000, **kw):
        super().fit(reference, kinds)
        self._cache.clear()
        slices = split_chunks(reference, chunk_size) or split_chunks(reference, reference.n_rows)
        self.pseudo_raw = {k: [] for k in self.kinds}
        self.pseudo_realized = {k: [] for k in self.kinds}
        with quiet():
            for piece in slices:
                proba = self._reverse_proba(piece)
                if proba is None:
                    continue
                for kind in self.kinds:
                    try:
                        realized = metric_of(kind, piece)
                        raw = self._raw(kind, proba)
                    except UndefinedMetricError:
                        continue
                    self.pseudo_realized[kind].append(realized)
                    self.pseudo_raw[kind].append(raw)
        self.bias = {
            k: float(np.mean(np.subtract(self.pseudo_realized[k], self.pseudo_raw[k])))
            if self.pseudo_raw[k]
            else 0.0
            for k in self.kinds
        }
        return self

    def estimate(self, kind, chunk) -> float:
        kind = MetricKind(kind)
        proba = self._cache.get(_chunk_key(chunk), lambda: self._reverse_proba(chunk))
        if proba is None:
            return self._fallback(kind, "chunk predictions contain a single class")
        try:
            raw = self._raw(kind, proba)
        except UndefinedMetricError:
            return self._fallback(kind, "reverse-tested metric is undefined")
        return float(np.clip(raw + self.bias[kind], 0.0, 1.0))


class _DensityRatioMixin:
    weight_clip: float
    _dre_cache: ChunkCache

    def _density_ratio(self, chunk) -> DensityRatioModel:
        return self._dre_cache.get(
            ("dre", _chunk_key(chunk)),
            lambda: fit_dre(self.reference.features, chunk.features, weight_clip=self.weight_clip),
        )

    def reference_weights(self, chunk) -> np.ndarray:
        """Density-ratio weights of reference rows toward ``chunk``."""
        return estimate_weights(self._density_ratio(chunk), self.reference.features)


class IW(_DensityRatioMixin, Estimator):
    """Importance-weighted metric on the reference data."""

    name = "iw"

    def __init__(self, weight_clip: float = DEFAULT_WEIGHT_CLIP, cache: Optional[ChunkCache] = None):
        self.weight_clip = weight_clip
        self._dre_cache = cache if cache is not None else ChunkCache()

    def estimate(self, kind, chunk) -> float:
        w = self.reference_weights(chunk)
        ess = w.sum() ** 2 / np.dot(w, w)
        if ess < MIN_EFFECTIVE_SAMPLE:
            warnings.warn(f"effective sample size {ess:.1f} is below {MIN_EFFECTIVE_SAMPLE:g}", SmallSampleWarning, stacklevel=2)
        return metric_of(kind, self.reference, weights=w)


class _CalibratedEstimator(Estimator):
    def calibrator_for(self, chunk) -> Calibrator:
        raise NotImplementedError

    def calibrated_probabilities(self, chunk) -> np.ndarray:
        return calibrate(self.calibrator_for(chunk), chunk.scores)

    def estimate(self, kind, chunk) -> float:
        if len(chunk.scores) < MIN_CHUNK_ROWS:
            warnings.warn(f"chunk has fewer than {MIN_CHUNK_ROWS} rows", SmallSampleWarning, stacklevel=2)
        c = self.calibrated_probabilities(chunk)
        return estimate_metric(kind, c, chunk.predictions, chunk.scores)


class CBPE(_CalibratedEstimator):
    """Expected metric under scores calibrated on the reference distribution."""

    name = "cbpe"

    def fit(self, reference, kinds=None, **kw):
        super().fit(reference, kinds)
        self.calibrator = fit_calibrator(reference.scores, reference.labels)
        return self

    def calibrator_for(self, chunk) -> Calibrator:
        return self.calibrator


class PAPE(_DensityRatioMixin, _CalibratedEstimator):
    """Expected metric under scores calibrated with density-ratio weights.

    For every chunk: fit the reference-vs-chunk classifier, weight the
    reference rows by the estimated density ratio, fit the weighted
    calibrator, calibrate the chunk scores and reconstruct the metric.
    """

    name = "pape"

    def __init__(self, weight_clip: float = DEFAULT_WEIGHT_CLIP, cache: Optional[ChunkCache] = None):
        self.weight_clip = weight_clip
        self._dre_cache = cache if cache is not None else ChunkCache()

    def calibrator_for(self, chunk) -> Calibrator:
        return self._dre_cache.get(
            ("pape-calibrator", _chunk_key(chunk)),
            lambda: fit_weighted_calibrator(
                self.reference.scores, self.reference.labels, self.reference_weights(chunk)
            ),
        )


METHODS: dict[str, type] = {cls.name: cls for cls in (TestSet, ATC, DoC, RTMod, IW, CBPE, PAPE)}
METHOD_ORDER: tuple[str, ...] = ("testset", "rtmod", "atc", "doc", "cbpe", "iw", "pape")


# one-shot helpers -----------------------------------------------------------


def pape_estimate(kind, reference: ScoredDataset, chunk, weight_clip: float = DEFAULT_WEIGHT_CLIP) -> float:
    return PAPE(weight_clip).fit(reference, [kind]).estimate(kind, chunk)


def cbpe_estimate(kind, reference: ScoredDataset, chunk) -> float:
    return CBPE().fit(reference, [kind]).estimate(kind, chunk)


def iw_estimate(kind, reference: ScoredDataset, chunk, weight_clip: float = DEFAULT_WEIGHT_CLIP) -> float:
    return IW(weight_clip).fit(reference, [kind]).estimate(kind, chunk)
