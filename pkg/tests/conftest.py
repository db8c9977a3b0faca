import numpy as np
import pytest

from pape.data_model import Role, ScoredDataset
from pape.synthetic import ShiftSpec, generate


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_dataset(labels, predictions, scores=None, features=None, role=Role.REFERENCE):
    labels = np.asarray(labels)
    n = labels.shape[0]
    if scores is None:
        scores = np.full(n, 0.5)
    if features is None:
        features = np.arange(n, dtype=float).reshape(-1, 1)
    return ScoredDataset(features, scores, predictions, labels, role)


@pytest.fixture(scope="session")
def no_shift_pair():
    spec = ShiftSpec(2, coef=[1.2, -0.8], intercept=0.1, n_ref=8000, n_prod=8000, seed=3)
    return generate(spec)


@pytest.fixture(scope="session")
def shifted_pair():
    spec = ShiftSpec(
        3, coef=[1.5, -1.0, 1.0], intercept=0.3, shift=[0.8, 0.0, 0.8], temperature=1.5,
        model_coef=[1.5, -1.0, 0.0], n_ref=8000, n_prod=6000, seed=11,
    )
    return generate(spec)
