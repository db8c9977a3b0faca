from .methods import (
    ATC,
    CBPE,
    IW,
    METHOD_ORDER,
    METHODS,
    PAPE,
    DoC,
    RTMod,
    TestSet,
    atc_threshold,
    cbpe_estimate,
    iw_estimate,
    max_confidence,
    pape_estimate,
)
from .metrics import ConfusionMasses, MetricKind, metric_from_confusion, metric_of, realized_metric, weighted_auc
from .reconstruction import estimate_accuracy, estimate_auroc, estimate_confusion, estimate_metric
from .suite import Estimate, EstimatorSuite, SuiteConfig, testset_estimate

EstimatedConfusion = ConfusionMasses

__all__ = [
    "ATC",
    "CBPE",
    "ConfusionMasses",
    "DoC",
    "Estimate",
    "EstimatedConfusion",
    "EstimatorSuite",
    "IW",
    "METHODS",
    "METHOD_ORDER",
    "MetricKind",
    "PAPE",
    "RTMod",
    "SuiteConfig",
    "TestSet",
    "atc_threshold",
    "cbpe_estimate",
    "estimate_accuracy",
    "estimate_auroc",
    "estimate_confusion",
    "estimate_metric",
    "iw_estimate",
    "max_confidence",
    "metric_from_confusion",
    "metric_of",
    "pape_estimate",
    "realized_metric",
    "testset_estimate",
    "weighted_auc",
]
