import numpy as np
import pytest

from pape.data_model import Chunk, DatasetSchema, Role, ScoredDataset, load_dataset, save_dataset, split_chunks
from pape.errors import EmptyInputError, SchemaError, ValidationError

SCHEMA = DatasetSchema(("f1",), "score", "pred", "label")


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_three_rows(tmp_path):
    path = write(tmp_path, "f1,score,pred,label\n0.5,0.9,1,1\n-1.0,0.2,0,0\n2,0.6,1,0\n")
    data = load_dataset(path, SCHEMA, "reference")
    assert data.n_rows == 3
    np.testing.assert_array_equal(data.scores, [0.9, 0.2, 0.6])
    np.testing.assert_array_equal(data.labels, [1, 0, 0])
    assert data.role is Role.REFERENCE


def test_score_out_of_range_cites_row(tmp_path):
    path = write(tmp_path, "f1,score,pred,label\n0.5,0.9,1,1\n0.1,1.2,1,1\n")
    with pytest.raises(ValidationError, match="row 1"):
        load_dataset(path, SCHEMA, "reference")


def test_non_binary_label_cites_row(tmp_path):
    path = write(tmp_path, "f1,score,pred,label\n0.5,0.9,1,1\n0.1,0.2,0,2\n")
    with pytest.raises(ValidationError, match="row 1"):
        load_dataset(path, SCHEMA, "reference")


def test_missing_prediction_column(tmp_path):
    path = write(tmp_path, "f1,score,label\n0.5,0.9,1\n")
    with pytest.raises(SchemaError, match="pred"):
        load_dataset(path, SCHEMA, "reference")


def test_empty_file(tmp_path):
    with pytest.raises(EmptyInputError):
        load_dataset(write(tmp_path, ""), SCHEMA, "reference")
    with pytest.raises(EmptyInputError):
        load_dataset(write(tmp_path, "f1,score,pred,label\n", "h.csv"), SCHEMA, "reference")


def test_production_may_lack_labels(tmp_path):
    path = write(tmp_path, "f1,score,pred\n0.5,0.9,1\n")
    data = load_dataset(path, SCHEMA, "production")
    assert data.labels is None
    with pytest.raises(SchemaError):
        load_dataset(path, SCHEMA, "reference")


def test_non_numeric_feature(tmp_path):
    path = write(tmp_path, "f1,score,pred,label\nabc,0.9,1,1\n")
    with pytest.raises(ValidationError, match="row 0"):
        load_dataset(path, SCHEMA, "reference")


def test_schema_rejects_overlap():
    with pytest.raises(SchemaError):
        DatasetSchema(("score",), "score", "pred")
    with pytest.raises(SchemaError):
        DatasetSchema(("a", "a"), "score", "pred")


def test_round_trip_is_bit_exact(tmp_path, rng):
    n = 50
    data = ScoredDataset(rng.normal(size=(n, 3)) * 1e3, rng.random(n), rng.integers(0, 2, n), rng.integers(0, 2, n))
    schema = DatasetSchema(("a", "b", "c"), "s", "p", "y")
    path = tmp_path / "rt.csv"
    save_dataset(path, data, schema)
    back = load_dataset(path, schema, "reference")
    assert np.array_equal(back.features, data.features)
    assert np.array_equal(back.scores, data.scores)
    assert np.array_equal(back.predictions, data.predictions)
    assert np.array_equal(back.labels, data.labels)


def test_dataset_is_read_only():
    data = ScoredDataset(np.zeros((2, 1)), [0.1, 0.2], [0, 1], [0, 1])
    with pytest.raises(ValueError):
        data.scores[0] = 0.3


def test_dataset_rejects_length_mismatch_and_nonfinite():
    with pytest.raises(ValidationError):
        ScoredDataset(np.zeros((3, 1)), [0.1, 0.2], [0, 1])
    with pytest.raises(ValidationError):
        ScoredDataset(np.array([[np.nan], [0.0]]), [0.1, 0.2], [0, 1])


def _production(n):
    return ScoredDataset(np.arange(n, dtype=float).reshape(-1, 1), np.full(n, 0.5), np.zeros(n), role="production")


@pytest.mark.parametrize(
    "n, size, step, starts",
    [
        (6000, 2000, 2000, [0, 2000, 4000]),
        (5000, 2000, 1000, [0, 1000, 2000, 3000]),
        (100, 2000, 1000, []),
        (6999, 2000, 2000, [0, 2000, 4000]),
    ],
)
def test_split_chunks(n, size, step, starts):
    chunks = split_chunks(_production(n), size, step)
    assert [c.start_index for c in chunks] == starts
    assert all(c.size == size for c in chunks)


def test_disjoint_chunks_reproduce_prefix():
    data = _production(7100)
    chunks = split_chunks(data, 1000)
    joined = np.concatenate([c.features[:, 0] for c in chunks])
    np.testing.assert_array_equal(joined, data.features[: len(joined), 0])


def test_chunk_bounds_checked():
    with pytest.raises(ValidationError):
        Chunk(_production(10), 5, 6)
    with pytest.raises(ValidationError):
        split_chunks(_production(10), 0)
