from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from ..data_model import ScoredDataset
from ..density_ratio import DEFAULT_WEIGHT_CLIP
from ..errors import EstimationWarning, PapeError
from .methods import ALL_KINDS, ATC, CBPE, IW, METHOD_ORDER, PAPE, ChunkCache, DoC, RTMod, TestSet
from .metrics import MetricKind


@dataclass(frozen=True)
class Estimate:
    """One estimate plus the warning flags raised while producing it.

    ``value`` is NaN and ``error`` set when the estimator failed.
    """

    value: float
    flags: tuple[str, ...] = ()
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class SuiteConfig:
    weight_clip: float = DEFAULT_WEIGHT_CLIP
    doc_n_resamples: int = 50
    doc_lambda_range: tuple[float, float] = (-3.0, 3.0)
    seed: int = 0


class EstimatorSuite:
    """All requested estimators fitted on one reference dataset.

    PAPE and IW share a per-chunk cache of density-ratio models.
    """

    def __init__(self, methods: Optional[Sequence[str]] = None, config: Optional[SuiteConfig] = None):
        self.methods = tuple(METHOD_ORDER if methods is None else methods)
        unknown = set(self.methods) - set(METHOD_ORDER)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        self.config = config or SuiteConfig()
        self.estimators: dict = {}

    def _build(self, name: str):
        cfg = self.config
        if name == "testset":
            return TestSet()
        if name == "atc":
            return ATC()
        if name == "doc":
            return DoC(cfg.doc_n_resamples, cfg.doc_lambda_range, cfg.seed)
        if name == "rtmod":
            return RTMod()
        if name == "iw":
            return IW(cfg.weight_clip, self._cache)
        if name == "cbpe":
            return CBPE()
        return PAPE(cfg.weight_clip, self._cache)

    def fit(self, reference: ScoredDataset, kinds: Optional[Iterable] = None, chunk_size: int = 2000) -> "EstimatorSuite":
        self.kinds = ALL_KINDS if kinds is None else tuple(MetricKind(k) for k in kinds)
        self.reference = reference
        self.chunk_size = chunk_size
        self._cache = ChunkCache()
        self.estimators = {}
        for name in self.methods:
            self.estimators[name] = self._build(name).fit(reference, self.kinds, chunk_size=chunk_size)
        return self

    @property
    def reference_values(self) -> dict:
        return dict(next(iter(self.estimators.values())).reference_values)

    def estimate(self, method: str, kind, chunk) -> Estimate:
        """Run one estimator on one chunk, converting warnings into flags."""
        kind = MetricKind(kind)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                value = float(self.estimators[method].estimate(kind, chunk))
                error = None
            except PapeError as exc:
                value, error = float("nan"), f"{type(exc).__name__}: {exc}"
        flags = sorted(
            {getattr(w.category, "code", "caution") for w in caught if issubclass(w.category, EstimationWarning)}
        )
        return Estimate(value, tuple(flags), error)

    def estimate_chunk(self, chunk) -> dict:
        """Estimates for every (method, kind) on one chunk, keyed by that pair."""
        return {(m, k): self.estimate(m, k, chunk) for m in self.methods for k in self.kinds}


def testset_estimate(kind, suite: EstimatorSuite) -> float:
    return suite.estimators["testset"].estimate(kind, None)


testset_estimate.__test__ = False
