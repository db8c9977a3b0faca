"""Scored datasets, CSV ingestion and time-ordered chunking."""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .errors import EmptyInputError, SchemaError, ValidationError


class Role(str, enum.Enum):
    REFERENCE = "reference"
    PRODUCTION = "production"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _check_binary(values: np.ndarray, name: str) -> np.ndarray:
    bad = ~((values == 0) | (values == 1))
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise ValidationError(f"{name} must be 0 or 1; row {row} has {values[row]!r}")
    return values.astype(np.int8)


@dataclass(frozen=True)
class ScoredDataset:
    """Model inputs and outputs for one data period.

    Parameters
    ----------
    features : ndarray of shape (n_rows, n_features)
    scores : ndarray of shape (n_rows,)
        Uncalibrated model scores in [0, 1].
    predictions : ndarray of shape (n_rows,)
        Binary actionable predictions of the monitored model.
    labels : ndarray of shape (n_rows,), optional
        Binary targets. Production data normally has none.
    role : Role
    """

    features: np.ndarray
    scores: np.ndarray
    predictions: np.ndarray
    labels: Optional[np.ndarray] = None
    role: Role = Role.REFERENCE

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        if features.ndim != 2:
            raise ValidationError("features must be a 2-D matrix")
        scores = np.asarray(self.scores, dtype=float).ravel()
        predictions = np.asarray(self.predictions).ravel()
        n = scores.shape[0]
        if n < 1:
            raise EmptyInputError("dataset has no rows")
        lengths = {"features": features.shape[0], "predictions": predictions.shape[0]}
        labels = None
        if self.labels is not None:
            labels = np.asarray(self.labels).ravel()
            lengths["labels"] = labels.shape[0]
        for name, length in lengths.items():
            if length != n:
                raise ValidationError(f"{name} has {length} rows, scores has {n}")
        if not np.isfinite(features).all():
            row = int(np.flatnonzero(~np.isfinite(features).all(axis=1))[0])
            raise ValidationError(f"non-finite feature value in row {row}")
        bad = ~(np.isfinite(scores) & (scores >= 0.0) & (scores <= 1.0))
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise ValidationError(f"score must lie in [0, 1]; row {row} has {scores[row]!r}")
        predictions = _check_binary(predictions, "prediction")
        if labels is not None:
            labels = _check_binary(labels, "label")
        object.__setattr__(self, "features", _readonly(features))
        object.__setattr__(self, "scores", _readonly(scores))
        object.__setattr__(self, "predictions", _readonly(predictions))
        object.__setattr__(self, "labels", None if labels is None else _readonly(labels))
        object.__setattr__(self, "role", Role(self.role))

    @property
    def n_rows(self) -> int:
        return self.scores.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    def take(self, rows) -> "ScoredDataset":
        """Row subset (fancy indexing, so duplicates are allowed)."""
        rows = np.asarray(rows)
        return ScoredDataset(
            self.features[rows],
            self.scores[rows],
            self.predictions[rows],
            None if self.labels is None else self.labels[rows],
            self.role,
        )


@dataclass(frozen=True)
class Chunk:
    """Read-only window ``[start_index, start_index + size)`` of a production dataset."""

    dataset: ScoredDataset = field(repr=False)
    start_index: int
    size: int

    def __post_init__(self):
        if self.start_index < 0 or self.size < 1:
            raise ValidationError("chunk needs start_index >= 0 and size >= 1")
        if self.start_index + self.size > self.dataset.n_rows:
            raise ValidationError("chunk extends past the end of the dataset")

    @property
    def _rows(self) -> slice:
        return slice(self.start_index, self.start_index + self.size)

    @property
    def features(self) -> np.ndarray:
        return self.dataset.features[self._rows]

    @property
    def scores(self) -> np.ndarray:
        return self.dataset.scores[self._rows]

    @property
    def predictions(self) -> np.ndarray:
        return self.dataset.predictions[self._rows]

    @property
    def labels(self) -> Optional[np.ndarray]:
        if self.dataset.labels is None:
            return None
        return self.dataset.labels[self._rows]

    @property
    def n_rows(self) -> int:
        return self.size

    @property
    def has_labels(self) -> bool:
        return self.dataset.labels is not None

    @property
    def key(self) -> tuple:
        return (id(self.dataset), self.start_index, self.size)


def split_chunks(data: ScoredDataset, chunk_size: int, step: Optional[int] = None) -> list[Chunk]:
    """Split ``data`` into fixed-size windows starting every ``step`` rows.

    Only fully filled windows are returned, so trailing rows are dropped and a
    dataset shorter than ``chunk_size`` yields an empty list.
    """
    if step is None:
        step = chunk_size
    if chunk_size < 1 or step < 1:
        raise ValidationError("chunk_size and step must be >= 1")
    starts = range(0, data.n_rows - chunk_size + 1, step)
    return [Chunk(data, start, chunk_size) for start in starts]


@dataclass(frozen=True)
class DatasetSchema:
    feature_columns: tuple[str, ...]
    score_column: str
    prediction_column: str
    label_column: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "feature_columns", tuple(self.feature_columns))
        special = [self.score_column, self.prediction_column]
        if self.label_column is not None:
            special.append(self.label_column)
        names = list(self.feature_columns) + special
        if len(set(names)) != len(names):
            raise SchemaError(f"schema column names must be distinct: {names}")
        if not self.feature_columns:
            raise SchemaError("schema needs at least one feature column")

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSchema":
        try:
            return cls(
                feature_columns=tuple(d["features"]),
                score_column=d["score"],
                prediction_column=d["prediction"],
                label_column=d.get("label"),
            )
        except KeyError as exc:
            raise SchemaError(f"schema is missing key {exc.args[0]!r}") from None

    def to_dict(self) -> dict:
        return {
            "features": list(self.feature_columns),
            "score": self.score_column,
            "prediction": self.prediction_column,
            "label": self.label_column,
        }


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return float("nan")


def load_dataset(path: str | os.PathLike, schema: DatasetSchema, role: Role | str) -> ScoredDataset:
    """Read a CSV file into a validated :class:`ScoredDataset`.

    The label column is optional for production data only. Row order is kept.
    """
    role = Role(role)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise EmptyInputError(f"{path}: file is empty") from None
    required = list(schema.feature_columns) + [schema.score_column, schema.prediction_column]
    if schema.label_column is not None and (role is Role.REFERENCE or schema.label_column in frame.columns):
        required.append(schema.label_column)
        use_labels = True
    else:
        use_labels = False
    for col in required:
        if col not in frame.columns:
            raise SchemaError(f"{path}: missing column {col!r}")
    if len(frame) == 0:
        raise EmptyInputError(f"{path}: no data rows")
    if role is Role.REFERENCE and schema.label_column is None:
        raise SchemaError("reference data requires a label column")

    def numeric(cols) -> np.ndarray:
        block = frame[cols]
        raw = block.to_numpy()
        try:
            out = raw.astype(float)
        except ValueError:
            out = np.vectorize(_parse_float, otypes=[float])(raw)
        bad = ~np.isfinite(out)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise ValidationError(f"{path}: row {r} column {cols[c]!r} is not a finite number: {block.iat[r, c]!r}")
        return out

    return ScoredDataset(
        features=numeric(list(schema.feature_columns)),
        scores=numeric([schema.score_column])[:, 0],
        predictions=numeric([schema.prediction_column])[:, 0],
        labels=numeric([schema.label_column])[:, 0] if use_labels else None,
        role=role,
    )


def save_dataset(path: str | os.PathLike, data: ScoredDataset, schema: DatasetSchema) -> None:
    """Write ``data`` as CSV; floats use shortest round-trip formatting."""
    columns: dict[str, Sequence] = {}
    for j, name in enumerate(schema.feature_columns):
        columns[name] = [repr(float(v)) for v in data.features[:, j]]
    columns[schema.score_column] = [repr(float(v)) for v in data.scores]
    columns[schema.prediction_column] = data.predictions.astype(int)
    if data.labels is not None and schema.label_column is not None:
        columns[schema.label_column] = data.labels.astype(int)
    pd.DataFrame(columns).to_csv(path, index=False, lineterminator="\n")
