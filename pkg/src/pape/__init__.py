"""Label-free performance estimation for binary classifiers under covariate shift."""

__version__ = "0.1.0"

from .calibration import Calibrator, calibrate, diagnose_calibration, fit_calibrator, fit_weighted_calibrator
from .data_model import Chunk, DatasetSchema, Role, ScoredDataset, load_dataset, save_dataset, split_chunks
from .density_ratio import DensityRatioModel, estimate_weights, fit_dre
from .estimators import EstimatorSuite, MetricKind, pape_estimate, realized_metric
from .synthetic import ShiftSpec, generate

__all__ = [
    "Calibrator",
    "Chunk",
    "DatasetSchema",
    "DensityRatioModel",
    "EstimatorSuite",
    "MetricKind",
    "Role",
    "ScoredDataset",
    "ShiftSpec",
    "calibrate",
    "diagnose_calibration",
    "estimate_weights",
    "fit_calibrator",
    "fit_dre",
    "fit_weighted_calibrator",
    "generate",
    "load_dataset",
    "pape_estimate",
    "realized_metric",
    "save_dataset",
    "split_chunks",
]
