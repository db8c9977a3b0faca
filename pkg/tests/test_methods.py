import warnings

import numpy as np
import pytest

from pape.data_model import Chunk, Role, ScoredDataset, split_chunks
from pape.errors import FallbackWarning, SmallSampleWarning
from pape.estimators import (
    ATC,
    CBPE,
    IW,
    PAPE,
    DoC,
    EstimatorSuite,
    MetricKind,
    RTMod,
    TestSet,
    atc_threshold,
    cbpe_estimate,
    max_confidence,
    metric_of,
    pape_estimate,
    realized_metric,
    testset_estimate,
)
from pape.evaluation import bootstrap_ses
from pape.synthetic import ShiftSpec, generate

from conftest import make_dataset


def oracle_pair(rng, n_ref=600, n_prod=200):
    """Reference and production whose scores equal their labels."""

    def make(n, role, loc):
        x = rng.normal(loc, 1.0, size=(n, 2))
        y = (rng.random(n) < 1 / (1 + np.exp(-x[:, 0]))).astype(int)
        return ScoredDataset(x, y.astype(float), y, y, role)

    return make(n_ref, Role.REFERENCE, 0.0), make(n_prod, Role.PRODUCTION, 0.5)


def test_max_confidence():
    np.testing.assert_allclose(max_confidence([0.3, 0.5, 0.9]), [0.7, 0.5, 0.9])


# TEST SET --------------------------------------------------------------------


def test_testset_is_constant(no_shift_pair):
    ref, prod, _ = no_shift_pair
    est = TestSet().fit(ref)
    expected = realized_metric("accuracy", ref.labels, ref.predictions)
    for chunk in split_chunks(prod, 2000):
        assert est.estimate("accuracy", chunk) == expected


def test_testset_refit_gives_new_constant(no_shift_pair):
    ref, _, _ = no_shift_pair
    suite = EstimatorSuite(["testset"]).fit(ref, ["accuracy"])
    a = testset_estimate("accuracy", suite)
    half = ref.take(np.arange(1000))
    suite.fit(half, ["accuracy"])
    assert testset_estimate("accuracy", suite) == metric_of("accuracy", half)
    assert a == metric_of("accuracy", ref)


# ATC -------------------------------------------------------------------------


def test_atc_hand_example():
    t = atc_threshold([0.6, 0.7, 0.8, 0.9], 0.75)
    assert t == 0.6
    est = ATC()
    est.thresholds = {MetricKind.ACCURACY: t}
    chunk = make_dataset([1, 0], [1, 0], scores=[0.65, 0.5])
    assert est.estimate("accuracy", chunk) == 0.5


def test_atc_self_consistency(no_shift_pair):
    ref, _, _ = no_shift_pair
    est = ATC().fit(ref)
    for kind in MetricKind:
        assert abs(est.estimate(kind, ref) - est.reference_values[kind]) <= 1 / ref.n_rows + 1e-12


# DoC -------------------------------------------------------------------------


def confident_when_correct(rng, n=6000):
    """Scores whose max confidence equals the probability of a correct prediction."""
    mc = rng.uniform(0.5, 1.0, n)
    pred = rng.integers(0, 2, n)
    s = np.where(pred == 1, mc, 1 - mc)
    correct = rng.random(n) < mc
    y = np.where(correct, pred, 1 - pred)
    return ScoredDataset(rng.normal(size=(n, 1)), s, pred, y)


def test_doc_slope_positive(rng):
    ref = confident_when_correct(rng)
    est = DoC(n_resamples=50, seed=1).fit(ref, ["accuracy"])
    assert est.models[MetricKind.ACCURACY].slope > 0


def test_doc_zero_difference_returns_reference_plus_intercept(rng):
    ref = confident_when_correct(rng)
    est = DoC(seed=2).fit(ref, ["accuracy"])
    m = est.models[MetricKind.ACCURACY]
    value = est.estimate("accuracy", ref)
    assert value == pytest.approx(est.reference_values[MetricKind.ACCURACY] + m.intercept, abs=1e-12)
    assert abs(value - est.reference_values[MetricKind.ACCURACY]) < 0.01


def test_doc_single_resample_falls_back(rng):
    ref = confident_when_correct(rng, 500)
    est = DoC(n_resamples=1).fit(ref, ["accuracy"], chunk_size=100)
    with pytest.warns(FallbackWarning):
        assert est.estimate("accuracy", ref) == est.reference_values[MetricKind.ACCURACY]


def test_doc_is_seeded(rng):
    ref = confident_when_correct(rng, 2000)
    a = DoC(seed=5).fit(ref, ["accuracy"], chunk_size=500).models
    b = DoC(seed=5).fit(ref, ["accuracy"], chunk_size=500).models
    assert a == b


# RT-mod ----------------------------------------------------------------------


def test_rtmod_bias_zeroes_mean_residual(no_shift_pair):
    ref, _, _ = no_shift_pair
    est = RTMod().fit(ref, chunk_size=2000)
    for kind in MetricKind:
        corrected = np.add(est.pseudo_raw[kind], est.bias[kind])
        assert abs(np.mean(np.subtract(est.pseudo_realized[kind], corrected))) < 1e-9


def test_rtmod_predictions_equal_labels(rng):
    x = rng.normal(size=(8000, 2))
    y = (x[:, 0] + 0.3 * x[:, 1] > 0).astype(int)
    s = 1 / (1 + np.exp(-4 * x[:, 0]))
    ref = ScoredDataset(x[:6000], s[:6000], y[:6000], y[:6000])
    prod = ScoredDataset(x[6000:], s[6000:], y[6000:], y[6000:], Role.PRODUCTION)
    est = RTMod().fit(ref, ["accuracy"], chunk_size=2000)
    assert abs(est.bias[MetricKind.ACCURACY]) < 0.02
    chunk = Chunk(prod, 0, 2000)
    assert est.estimate("accuracy", chunk) == pytest.approx(1.0, abs=0.02)


def test_rtmod_single_class_falls_back(no_shift_pair):
    ref, prod, _ = no_shift_pair
    est = RTMod().fit(ref, ["accuracy"], chunk_size=2000)
    chunk = ScoredDataset(prod.features[:50], prod.scores[:50], np.ones(50), None, Role.PRODUCTION)
    with pytest.warns(FallbackWarning):
        assert est.estimate("accuracy", chunk) == est.reference_values[MetricKind.ACCURACY]


# IW --------------------------------------------------------------------------


def test_unit_weights_equal_realized_bitwise(no_shift_pair):
    ref, _, _ = no_shift_pair
    for kind in MetricKind:
        assert metric_of(kind, ref, weights=np.ones(ref.n_rows)) == metric_of(kind, ref)


def test_weighted_accuracy_two_thirds():
    ref = make_dataset([1, 0], [1, 1])
    assert metric_of("accuracy", ref, weights=np.array([2.0, 1.0])) == pytest.approx(2 / 3, abs=1e-15)


def test_iw_small_effective_sample_flag(rng):
    ref = make_dataset(rng.integers(0, 2, 40), rng.integers(0, 2, 40), features=rng.normal(size=(40, 1)))
    prod = make_dataset(np.zeros(40), np.zeros(40), features=rng.normal(3.0, 0.3, size=(40, 1)), role=Role.PRODUCTION)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        IW().fit(ref, ["accuracy"]).estimate("accuracy", prod)
    assert any(issubclass(w.category, SmallSampleWarning) for w in caught)


# PAPE / CBPE -----------------------------------------------------------------


def test_oracle_calibration_exact_for_all_kinds(rng):
    ref, prod = oracle_pair(rng)
    pape = PAPE().fit(ref)
    cbpe = CBPE().fit(ref)
    for kind in MetricKind:
        realized = metric_of(kind, prod)
        assert pape.estimate(kind, prod) == realized
        assert cbpe.estimate(kind, prod) == realized


def test_small_chunk_flag(no_shift_pair):
    ref, prod, _ = no_shift_pair
    suite = EstimatorSuite(["pape", "cbpe"]).fit(ref, ["accuracy"])
    res = suite.estimate_chunk(Chunk(prod, 0, 8))
    for (method, _), est in res.items():
        assert "small_sample" in est.flags, method


def test_one_shot_helpers_match_suite(shifted_pair):
    ref, prod, _ = shifted_pair
    chunk = Chunk(prod, 2000, 2000)
    suite = EstimatorSuite(["pape", "cbpe"]).fit(ref, ["f1"])
    assert pape_estimate("f1", ref, chunk) == suite.estimate("pape", "f1", chunk).value
    assert cbpe_estimate("f1", ref, chunk) == suite.estimate("cbpe", "f1", chunk).value


def test_cache_replays_flags(rng):
    ref = make_dataset(rng.integers(0, 2, 40), rng.integers(0, 2, 40), features=rng.normal(size=(40, 1)))
    prod = ScoredDataset(rng.normal(4.0, 0.2, size=(40, 1)), np.full(40, 0.5), np.zeros(40), None, Role.PRODUCTION)
    chunk = Chunk(prod, 0, 40)
    suite = EstimatorSuite(["pape", "iw"]).fit(ref, ["accuracy", "recall"])
    first = suite.estimate("pape", "accuracy", chunk).flags
    again = suite.estimate("pape", "recall", chunk).flags
    iw = suite.estimate("iw", "accuracy", chunk).flags
    assert "coverage" in first and "coverage" in again and "coverage" in iw


@pytest.fixture(scope="module")
def no_shift_case():
    spec = ShiftSpec(2, coef=[1.2, -0.8], intercept=0.1, temperature=1.5, n_ref=10_000, n_prod=20_000, seed=21)
    ref, prod, _ = generate(spec)
    ses = bootstrap_ses(ref, [MetricKind.ACCURACY, MetricKind.AUROC], n_boot=200, seed=0)
    return ref, prod, ses


def test_no_shift_iw_and_pape_close_to_realized(no_shift_case):
    ref, prod, ses = no_shift_case
    suite = EstimatorSuite(["pape", "cbpe", "iw"]).fit(ref, ["accuracy", "auroc"])
    for chunk in split_chunks(prod, 2000):
        res = suite.estimate_chunk(chunk)
        for kind in ("accuracy", "auroc"):
            se = ses[MetricKind(kind)]
            realized = metric_of(kind, chunk)
            for method in ("pape", "cbpe", "iw"):
                assert abs(res[(method, MetricKind(kind))].value - realized) < 4 * se
            # without shift the weighted and unweighted calibrators agree
            diff = res[("pape", MetricKind(kind))].value - res[("cbpe", MetricKind(kind))].value
            assert abs(diff) < 2 * se


def test_shift_separates_cbpe_and_pape(shifted_pair):
    ref, prod, _ = shifted_pair
    chunk = Chunk(prod, 0, 2000)
    suite = EstimatorSuite(["pape", "cbpe"]).fit(ref, ["accuracy"])
    assert suite.estimate("pape", "accuracy", chunk).value != suite.estimate("cbpe", "accuracy", chunk).value
