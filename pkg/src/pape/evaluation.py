"""Evaluation harness: bootstrap SE, SE-scaled errors, buckets and sample-size sweeps."""

from __future__ import annotations

import logging
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .data_model import Chunk, ScoredDataset, split_chunks
from .errors import SEUndefinedError, UndefinedMetricError, ValidationError, quiet
from .estimators.metrics import MetricKind, metric_of, realized_metric
from .estimators.methods import METHOD_ORDER
from .estimators.suite import EstimatorSuite, SuiteConfig

log = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 2000
DEFAULT_N_BOOT = 500
MIN_REFERENCE_CHUNKS = 3
SWEEP_SIZES = (100, 200, 500, 1000, 2000, 5000)
SWEEP_STEP = 1000


# ---------------------------------------------------------------------------
# standard errors


def bootstrap_metric_samples(
    reference: ScoredDataset,
    kinds: Iterable,
    sample_size: int = DEFAULT_CHUNK_SIZE,
    n_boot: int = DEFAULT_N_BOOT,
    seed: int = 0,
) -> dict:
    """Realized metrics on ``n_boot`` with-replacement resamples of ``reference``.

    All kinds are evaluated on the same resample indices. Resamples where a
    metric is undefined hold NaN.
    """
    if reference.labels is None:
        raise ValidationError("bootstrap SE needs labeled reference data")
    if sample_size < 1 or n_boot < 2:
        raise ValidationError("need sample_size >= 1 and n_boot >= 2")
    kinds = [MetricKind(k) for k in kinds]
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, reference.n_rows, size=(n_boot, sample_size))
    y = reference.labels[idx]
    g = reference.predictions[idx]
    s = reference.scores[idx]
    out = {}
    for kind in kinds:
        if kind is MetricKind.ACCURACY:
            out[kind] = np.mean(y == g, axis=1)
            continue
        values = np.full(n_boot, np.nan)
        with quiet():
            for b in range(n_boot):
                try:
                    values[b] = realized_metric(kind, y[b], g[b], s[b])
                except UndefinedMetricError:
                    pass
        out[kind] = values
    return out


def _se_from_samples(kind: MetricKind, values: np.ndarray) -> float:
    defined = values[~np.isnan(values)]
    if defined.shape[0] < 0.9 * values.shape[0]:
        raise SEUndefinedError(
            f"{kind.value} undefined on {values.shape[0] - defined.shape[0]} of {values.shape[0]} resamples"
        )
    return float(np.std(defined))


def bootstrap_se(
    reference: ScoredDataset,
    kind,
    sample_size: int = DEFAULT_CHUNK_SIZE,
    n_boot: int = DEFAULT_N_BOOT,
    seed: int = 0,
) -> float:
    """Standard deviation (divisor ``n_boot``) of the metric over bootstrap resamples."""
    kind = MetricKind(kind)
    return _se_from_samples(kind, bootstrap_metric_samples(reference, [kind], sample_size, n_boot, seed)[kind])


def bootstrap_ses(reference, kinds, sample_size=DEFAULT_CHUNK_SIZE, n_boot=DEFAULT_N_BOOT, seed=0) -> dict:
    """Per-kind SE on shared resamples; kinds with undefined SE map to the raised error."""
    samples = bootstrap_metric_samples(reference, kinds, sample_size, n_boot, seed)
    out = {}
    for kind, values in samples.items():
        try:
            out[kind] = _se_from_samples(kind, values)
        except SEUndefinedError as exc:
            out[kind] = exc
    return out


# ---------------------------------------------------------------------------
# cases and filtering


@dataclass
class EvaluationCase:
    case_id: str
    reference: ScoredDataset
    production: ScoredDataset
    chunk_size: int = DEFAULT_CHUNK_SIZE
    se: dict = field(default_factory=dict)

    @property
    def chunk_count(self) -> int:
        return len(split_chunks(self.production, self.chunk_size))


@dataclass(frozen=True)
class FilterResult:
    accepted: bool
    reasons: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.accepted


def filter_case(case: EvaluationCase) -> FilterResult:
    """Reject cases with too little reference data or a worse-than-random model."""
    reasons = []
    ref = case.reference
    needed = MIN_REFERENCE_CHUNKS * case.chunk_size
    if ref.n_rows < needed:
        reasons.append(f"fewer than {MIN_REFERENCE_CHUNKS} chunks of reference data ({ref.n_rows} < {needed} rows)")
    try:
        auroc = metric_of(MetricKind.AUROC, ref)
        if auroc < 0.5:
            reasons.append(f"reference AUROC {auroc:.4f} is below 0.5")
    except UndefinedMetricError:
        reasons.append("reference AUROC is undefined")
    with quiet():
        if metric_of(MetricKind.F1, ref) == 0.0:
            reasons.append("reference F1 is 0")
    for kind, se in sorted(case.se.items(), key=lambda kv: MetricKind(kv[0]).value):
        if isinstance(se, Exception):
            continue
        if not se > 0:
            reasons.append(f"standard error of {MetricKind(kind).value} is 0")
    return FilterResult(not reasons, tuple(reasons))


# ---------------------------------------------------------------------------
# SE-scaled error metrics


@dataclass(frozen=True)
class EstimationPoint:
    case_id: str
    chunk_index: int
    start_index: int
    kind: MetricKind
    realized: float
    reference_value: float
    se: float
    estimates: dict

    @property
    def change_in_se(self) -> float:
        return abs(self.realized - self.reference_value) / self.se


def _scaled_errors(points: Sequence[EstimationPoint], method: str, kind) -> np.ndarray:
    kind = MetricKind(kind)
    errs = [
        (p.realized - p.estimates[method]) / p.se
        for p in points
        if p.kind is kind and method in p.estimates and np.isfinite(p.estimates[method])
    ]
    if not errs:
        raise UndefinedMetricError(f"no evaluation points for {method}/{kind.value}")
    return np.asarray(errs)


def maste(points: Sequence[EstimationPoint], method: str, kind) -> float:
    """Mean absolute estimation error in units of the case's SE."""
    return float(np.mean(np.abs(_scaled_errors(points, method, kind))))


def rmsste(points: Sequence[EstimationPoint], method: str, kind) -> float:
    """Root mean squared estimation error in units of the case's SE."""
    return float(np.sqrt(np.mean(_scaled_errors(points, method, kind) ** 2)))


@dataclass(frozen=True)
class Bucket:
    center: float
    maste: float
    count: int


def rolling_maste(points: Sequence[EstimationPoint], method: str, kind, bucket_width_se: float = 2.0) -> list[Bucket]:
    """MASTE per bucket of absolute performance change (in SE units).

    Buckets are ``[k * width, (k + 1) * width)`` labelled by their centers;
    empty buckets are omitted.
    """
    if not bucket_width_se > 0:
        raise ValidationError("bucket width must be positive")
    kind = MetricKind(kind)
    rows = [
        (p.change_in_se, abs(p.realized - p.estimates[method]) / p.se)
        for p in points
        if p.kind is kind and method in p.estimates and np.isfinite(p.estimates[method])
    ]
    if not rows:
        return []
    change, err = np.asarray(rows).T
    index = np.floor(change / bucket_width_se).astype(int)
    out = []
    for b in np.unique(index):
        sel = index == b
        out.append(Bucket((b + 0.5) * bucket_width_se, float(err[sel].mean()), int(sel.sum())))
    return out


@dataclass
class EvaluationReport:
    summary: list = field(default_factory=list)  # dicts: method, metric, maste, rmsste, n_points
    buckets: list = field(default_factory=list)  # dicts: method, metric, center, maste, count
    standard_errors: list = field(default_factory=list)  # dicts: case_id, metric, se
    audit: list = field(default_factory=list)  # dicts: case_id, metric, reason

    def lookup(self, method: str, kind) -> dict:
        kind = MetricKind(kind).value
        for row in self.summary:
            if row["method"] == method and row["metric"] == kind:
                return row
        raise KeyError((method, kind))


def build_report(points, methods, kinds, bucket_width_se: float = 2.0) -> EvaluationReport:
    report = EvaluationReport()
    for kind in (MetricKind(k) for k in kinds):
        for method in methods:
            try:
                errs = _scaled_errors(points, method, kind)
            except UndefinedMetricError:
                continue
            report.summary.append(
                {
                    "method": method,
                    "metric": kind.value,
                    "maste": float(np.mean(np.abs(errs))),
                    "rmsste": float(np.sqrt(np.mean(errs**2))),
                    "n_points": int(errs.shape[0]),
                }
            )
            for b in rolling_maste(points, method, kind, bucket_width_se):
                report.buckets.append(
                    {"method": method, "metric": kind.value, "center": b.center, "maste": b.maste, "count": b.count}
                )
    return report


# ---------------------------------------------------------------------------
# running estimators over chunks

_WORKER_SUITE: Optional[EstimatorSuite] = None


def _init_worker(suite):
    global _WORKER_SUITE
    _WORKER_SUITE = suite


def _worker_estimate(chunk_bounds):
    start, size = chunk_bounds
    suite = _WORKER_SUITE
    return suite.estimate_chunk(Chunk(suite._production, start, size))


def estimate_chunks(suite: EstimatorSuite, production: ScoredDataset, chunks: Sequence[Chunk], workers: int = 1) -> list[dict]:
    """Run every fitted estimator on every chunk; output order follows ``chunks``."""
    if workers <= 1 or len(chunks) <= 1:
        return [suite.estimate_chunk(c) for c in chunks]
    suite._production = production
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx, initializer=_init_worker, initargs=(suite,)) as pool:
        return list(pool.map(_worker_estimate, [(c.start_index, c.size) for c in chunks]))


def evaluate_case(
    case: EvaluationCase,
    kinds: Iterable,
    methods: Optional[Sequence[str]] = None,
    config: Optional[SuiteConfig] = None,
    step: Optional[int] = None,
    workers: int = 1,
) -> list[EstimationPoint]:
    """Estimation points for every production chunk of one case.

    Only kinds with a positive SE in ``case.se`` are evaluated.
    """
    if case.production.labels is None:
        raise ValidationError("evaluation needs labeled production data")
    kinds = [MetricKind(k) for k in kinds if isinstance(case.se.get(MetricKind(k)), float) and case.se[MetricKind(k)] > 0]
    if not kinds:
        return []
    suite = EstimatorSuite(methods, config).fit(case.reference, kinds, case.chunk_size)
    chunks = split_chunks(case.production, case.chunk_size, step)
    results = estimate_chunks(suite, case.production, chunks, workers)
    ref_values = suite.reference_values
    points = []
    for j, (chunk, res) in enumerate(zip(chunks, results)):
        for kind in kinds:
            try:
                with quiet():
                    realized = metric_of(kind, chunk)
            except UndefinedMetricError:
                continue
            points.append(
                EstimationPoint(
                    case.case_id,
                    j,
                    chunk.start_index,
                    kind,
                    realized,
                    ref_values[kind],
                    case.se[kind],
                    {m: res[(m, kind)].value for m in suite.methods},
                )
            )
    return points


def prepare_case(case: EvaluationCase, kinds: Iterable, n_boot: int = DEFAULT_N_BOOT, seed: int = 0) -> list[dict]:
    """Fill ``case.se`` by bootstrap; returns audit entries for undefined SEs."""
    audit = []
    for kind, se in bootstrap_ses(case.reference, kinds, case.chunk_size, n_boot, seed).items():
        case.se[kind] = se
        if isinstance(se, Exception):
            audit.append({"case_id": case.case_id, "metric": kind.value, "reason": f"SE undefined: {se}"})
    return audit


def run_evaluation(
    cases: Sequence[EvaluationCase],
    kinds: Iterable,
    methods: Optional[Sequence[str]] = None,
    config: Optional[SuiteConfig] = None,
    n_boot: int = DEFAULT_N_BOOT,
    seed: int = 0,
    step: Optional[int] = None,
    workers: int = 1,
    bucket_width_se: float = 2.0,
) -> tuple[EvaluationReport, list[EstimationPoint]]:
    """Bootstrap SEs, filter cases, estimate every chunk and aggregate."""
    kinds = [MetricKind(k) for k in kinds]
    methods = tuple(METHOD_ORDER if methods is None else methods)
    audit, points, se_rows = [], [], []
    for case in cases:
        audit += prepare_case(case, kinds, n_boot, seed)
        for kind in kinds:
            if isinstance(case.se[kind], float):
                se_rows.append({"case_id": case.case_id, "metric": kind.value, "se": case.se[kind]})
        verdict = filter_case(case)
        if not verdict:
            audit += [{"case_id": case.case_id, "metric": "", "reason": r} for r in verdict.reasons]
            log.info("case %s rejected: %s", case.case_id, "; ".join(verdict.reasons))
            continue
        points += evaluate_case(case, kinds, methods, config, step, workers)
    report = build_report(points, methods, kinds, bucket_width_se)
    report.standard_errors = se_rows
    report.audit = audit
    return report, points


# ---------------------------------------------------------------------------
# sample-size sweep


@dataclass(frozen=True)
class SweepRow:
    size: int
    method: str
    mae: float
    n_chunks: int
    skipped: Optional[str] = None


def sample_size_sweep(
    case: EvaluationCase,
    kind,
    sizes: Sequence[int] = SWEEP_SIZES,
    step: int = SWEEP_STEP,
    methods: Optional[Sequence[str]] = None,
    seed: int = 0,
    config: Optional[SuiteConfig] = None,
    workers: int = 1,
) -> list[SweepRow]:
    """Mean absolute estimation error per chunk size, for one case and metric."""
    kind = MetricKind(kind)
    methods = tuple(METHOD_ORDER if methods is None else methods)
    if any(s < 1 for s in sizes):
        raise ValidationError("chunk sizes must be positive")
    if config is None:
        config = SuiteConfig(seed=seed)
    rows = []
    for size in sizes:
        chunks = split_chunks(case.production, size, step)
        if len(chunks) < 2:
            reason = f"production has {case.production.n_rows} rows, fewer than 2 chunks of {size}"
            rows += [SweepRow(size, m, float("nan"), len(chunks), reason) for m in methods]
            continue
        suite = EstimatorSuite(methods, config).fit(case.reference, [kind], size)
        results = estimate_chunks(suite, case.production, chunks, workers)
        errors = {m: [] for m in methods}
        for chunk, res in zip(chunks, results):
            try:
                with quiet():
                    realized = metric_of(kind, chunk)
            except UndefinedMetricError:
                continue
            for m in methods:
                value = res[(m, kind)].value
                if np.isfinite(value):
                    errors[m].append(abs(realized - value))
        for m in methods:
            mae = float(np.mean(errors[m])) if errors[m] else float("nan")
            rows.append(SweepRow(size, m, mae, len(errors[m]), None if errors[m] else "no defined chunks"))
    return rows
