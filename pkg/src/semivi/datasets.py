"""Labeled datasets: validation, a synthetic blobs generator, and CSV ingestion.

CSV format: a header row, first column the integer class label (0-based),
remaining columns real-valued features. Preprocessing (divide-by-255,
standardization) is applied at load time and should be recorded in run
metadata by the caller.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    K: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-d array")
        if self.labels.shape != (self.features.shape[0],):
            raise DataError("labels length must match the number of rows")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain non-finite values")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.K):
            raise DataError(f"labels must lie in [0, {self.K})")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.features[idx], self.labels[idx], self.K)


def make_blobs(
    n: int,
    n_features: int,
    n_classes: int,
    rng: np.random.Generator,
    center_scale: float = 0.5,
    noise: float = 1.0,
) -> LabeledDataset:
    """Balanced Gaussian blobs: one spherical cluster per class.

    Centers are drawn once from N(0, center_scale^2 I); the default scale
    keeps the classes overlapping enough that the posterior stays
    informative.
    """
    centers = center_scale * rng.standard_normal((n_classes, n_features))
    labels = rng.integers(0, n_classes, size=n)
    features = centers[labels] + noise * rng.standard_normal((n, n_features))
    return LabeledDataset(features, labels, n_classes)


def load_csv(path, divide_255: bool = False, standardize: bool = False) -> LabeledDataset:
    """Parse the labeled-CSV format, with line numbers in every error."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2:
            raise DataError(f"{path}: header needs a label column and at least one feature")
        seen = set()
        for name in header:
            if name in seen:
                raise DataError(f"{path}: duplicate header column {name!r}")
            seen.add(name)

        n_cols = len(header)
        labels, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n_cols:
                raise DataError(
                    f"{path}:{lineno}: expected {n_cols} columns, found {len(row)}"
                )
            try:
                label = int(row[0])
            except ValueError:
                raise DataError(f"{path}:{lineno}: label {row[0]!r} is not an integer") from None
            if label < 0:
                raise DataError(f"{path}:{lineno}: label {label} is negative")
            try:
                feats = [float(v) for v in row[1:]]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric feature value") from None
            labels.append(label)
            rows.append(feats)

    if not rows:
        raise DataError(f"{path}: no data rows")
    features = np.array(rows, dtype=np.float64)
    labels = np.array(labels, dtype=np.int64)
    if divide_255:
        features = features / 255.0
    if standardize:
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        features = (features - mean) / np.maximum(std, 1e-12)
    return LabeledDataset(features, labels, int(labels.max()) + 1)


def train_test_split(ds: LabeledDataset, test_fraction: float, rng: np.random.Generator):
    """Shuffled split; returns (train, test)."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    perm = rng.permutation(ds.n)
    n_test = max(1, int(round(ds.n * test_fraction)))
    return ds.subset(perm[n_test:]), ds.subset(perm[:n_test])
