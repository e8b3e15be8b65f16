"""Sample containers and CSV ingestion.

A :class:`SampleSet` stores a two-sample-test side as a ``(d, n)`` matrix:
features along rows, samples along columns, with one name per feature.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ConfigError, DataError

LAYOUTS = ("rows_are_samples", "labeled_single_file")


@dataclass(frozen=True)
class SampleSet:
    """A d-by-n matrix of samples (columns) by features (rows)."""

    values: np.ndarray
    feature_names: tuple = field(default=())

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2:
            raise DataError(f"sample matrix must be 2-d, got shape {arr.shape}")
        names = tuple(self.feature_names) or tuple(f"f{i}" for i in range(arr.shape[0]))
        if len(names) != arr.shape[0]:
            raise DataError(
                f"{len(names)} feature names for {arr.shape[0]} features"
            )
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_features(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]

    def feature(self, s: int) -> "SampleSet":
        """Single-feature slice as a 1-by-n SampleSet."""
        return SampleSet(self.values[s : s + 1], (self.feature_names[s],))

    def take(self, columns) -> "SampleSet":
        """Subset of samples (columns), preserving feature names."""
        return SampleSet(self.values[:, columns], self.feature_names)


ArrayLike = Union[SampleSet, np.ndarray, Sequence]


def as_matrix(data: ArrayLike) -> np.ndarray:
    """Coerce a SampleSet or array-like to a (d, n) float matrix."""
    if isinstance(data, SampleSet):
        return data.values
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise DataError(f"expected a (d, n) matrix, got shape {arr.shape}")
    return arr


def _parse_cell(text: str, row: int, col: int, path) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(
            f"{path}: non-numeric cell {text!r} at row {row}, column {col}"
        ) from None
    if not np.isfinite(value):
        raise DataError(
            f"{path}: non-finite cell {text!r} at row {row}, column {col}"
        )
    return value


def load_samples(path, layout: str = "rows_are_samples", label_column=None):
    """Load a CSV file of samples.

    ``rows_are_samples`` expects a header of feature names and one sample per
    row; the result is a single SampleSet (transposed to d-by-n).
    ``labeled_single_file`` additionally requires ``label_column`` naming a
    0/1 column; rows labelled 0 become X and rows labelled 1 become Y.
    """
    if layout not in LAYOUTS:
        raise ConfigError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = [row for row in reader if row]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: file is empty")
    header = [name.strip() for name in rows[0]]
    if len(rows) == 1:
        raise DataError(f"{path}: no data rows below the header")

    width = len(header)
    body = np.empty((len(rows) - 1, width))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise DataError(
                f"{path}: row {i} has {len(row)} cells, header has {width}"
            )
        for j, cell in enumerate(row):
            body[i - 2, j] = _parse_cell(cell.strip(), i, j + 1, path)

    if layout == "rows_are_samples":
        return SampleSet(body.T, tuple(header))

    if label_column is None:
        raise ConfigError("labeled_single_file layout requires a label column")
    if label_column not in header:
        raise DataError(f"{path}: label column {label_column!r} not in header")
    lab = header.index(label_column)
    labels = body[:, lab]
    bad = ~np.isin(labels, (0.0, 1.0))
    if np.any(bad):
        first = int(np.argmax(bad))
        raise DataError(
            f"{path}: unknown label value {labels[first]!r} at data row {first + 2}"
        )
    feats = [j for j in range(width) if j != lab]
    names = tuple(header[j] for j in feats)
    x_rows = body[labels == 0.0][:, feats]
    y_rows = body[labels == 1.0][:, feats]
    if x_rows.shape[0] == 0 or y_rows.shape[0] == 0:
        raise DataError(f"{path}: one of the label groups 0/1 is empty")
    return SampleSet(x_rows.T, names), SampleSet(y_rows.T, names)


def save_samples(sample_set: SampleSet, path) -> None:
    """Write a SampleSet as a rows-are-samples CSV with a header."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(sample_set.feature_names)
        for col in sample_set.values.T:
            writer.writerow([repr(float(v)) for v in col])
