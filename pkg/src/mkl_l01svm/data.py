"""Dataset loading, z-score normalization, splitting and CV folds.

Also hosts the 2-d disk/annulus generator used for the synthetic benchmark.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DataError",
    "Dataset",
    "NormStats",
    "FoldPlan",
    "load_dataset",
    "save_csv",
    "fit_normalizer",
    "apply_normalizer",
    "split",
    "make_folds",
    "synth_2d",
]


class DataError(ValueError):
    """Raised for unreadable, malformed or unusable datasets."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (rows are samples) and a +/-1 label vector."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if X.ndim != 2:
            raise DataError(f"features must be 2-d, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DataError(
                f"label length {y.shape} does not match feature rows {X.shape[0]}"
            )
        if not np.all((y == 1.0) | (y == -1.0)):
            raise DataError("labels must be exactly -1 or +1")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def n(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.features[idx], self.labels[idx])

    def class_counts(self) -> tuple[int, int]:
        """Return ``(m_plus, m_minus)``."""
        m_plus = int(np.count_nonzero(self.labels > 0))
        return m_plus, self.m - m_plus

    def require_trainable(self) -> None:
        m_plus, m_minus = self.class_counts()
        if self.m < 2 or m_plus == 0 or m_minus == 0:
            raise DataError(
                f"training set needs both classes (m+={m_plus}, m-={m_minus})"
            )


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: tuple  # tuple of sorted int arrays, one per fold

    def train_test(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """Indices of the training part and the held-out part of ``fold``."""
        test = self.assignments[fold]
        train = np.concatenate(
            [a for j, a in enumerate(self.assignments) if j != fold]
        )
        return np.sort(train), test


def _map_labels(raw: np.ndarray) -> np.ndarray:
    values = set(np.unique(raw).tolist())
    if values <= {-1.0, 1.0}:
        return raw.astype(float)
    if values <= {0.0, 1.0}:
        return np.where(raw > 0, 1.0, -1.0)
    bad = sorted(values - {-1.0, 0.0, 1.0})[:3]
    raise DataError(f"labels must be in {{-1,+1}} or {{0,1}}; found {bad}")


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _load_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows and not all(_is_number(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0])
    if width < 2:
        raise DataError(f"{path}: need at least one feature column and a label")
    values = []
    for lineno, row in enumerate(rows, start=1):
        if len(row) != width:
            raise DataError(
                f"{path}: inconsistent column count in data row {lineno} "
                f"(expected {width}, got {len(row)})"
            )
        try:
            values.append([float(c) for c in row])
        except ValueError as exc:
            raise DataError(f"{path}: malformed data row {lineno}: {exc}") from None
    arr = np.asarray(values, dtype=float)
    return arr[:, :-1], arr[:, -1]


def _load_libsvm(path) -> tuple[np.ndarray, np.ndarray]:
    labels, entries = [], []
    n = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            try:
                labels.append(float(toks[0]))
                row = {}
                for tok in toks[1:]:
                    idx, val = tok.split(":", 1)
                    j = int(idx)
                    if j < 1:
                        raise ValueError(f"feature index {j} is not 1-based")
                    row[j - 1] = float(val)
            except ValueError as exc:
                raise DataError(f"{path}: malformed row {lineno}: {exc}") from None
            if row:
                n = max(n, max(row) + 1)
            entries.append(row)
    if not labels:
        raise DataError(f"{path}: no data rows")
    X = np.zeros((len(labels), n))
    for i, row in enumerate(entries):
        for j, v in row.items():
            X[i, j] = v
    return X, np.asarray(labels)


def load_dataset(path, format: str = "csv") -> Dataset:
    """Load a labelled dataset from ``path``.

    CSV files hold the features in the leading columns and the label in the
    last one; a non-numeric first row is treated as a header. libsvm files
    use ``label idx:val ...`` with 1-based indices and are densified.
    Labels in {0, 1} are mapped to {-1, +1}.
    """
    if not os.path.isfile(path):
        raise DataError(f"{path}: no such file")
    if format == "csv":
        X, raw = _load_csv(path)
    elif format == "libsvm":
        X, raw = _load_libsvm(path)
    else:
        raise DataError(f"unknown dataset format {format!r}")
    if not np.all(np.isfinite(X)):
        raise DataError(f"{path}: non-finite feature values")
    return Dataset(X, _map_labels(raw))


def save_csv(ds: Dataset, path) -> None:
    header = [f"x{j + 1}" for j in range(ds.n)] + ["label"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for x, y in zip(ds.features, ds.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])


def fit_normalizer(train: Dataset) -> NormStats:
    if train.m < 2:
        raise DataError("normalizer needs at least two rows")
    X = train.features
    std = X.std(axis=0)
    # rounding in the mean can leave a tiny nonzero std on constant columns
    std[np.ptp(X, axis=0) == 0] = 0.0
    return NormStats(mean=X.mean(axis=0), std=std)


def apply_normalizer(stats: NormStats, ds: Dataset) -> Dataset:
    """Z-score ``ds`` with ``stats``; zero-variance features map to 0."""
    if ds.n != stats.mean.shape[0]:
        raise DataError(
            f"dimension mismatch: data has {ds.n} features, stats have "
            f"{stats.mean.shape[0]}"
        )
    safe = np.where(stats.std > 0, stats.std, 1.0)
    Z = (ds.features - stats.mean) / safe
    Z[:, stats.std == 0] = 0.0
    return Dataset(Z, ds.labels)


def split(ds: Dataset, train_frac: float, seed: int) -> tuple[Dataset, Dataset]:
    """Random train/test split with ``round(train_frac * m)`` training rows."""
    if not 0.0 < train_frac < 1.0:
        raise DataError(f"train_frac must lie in (0, 1), got {train_frac}")
    n_train = int(math.floor(train_frac * ds.m + 0.5))
    perm = np.random.default_rng(seed).permutation(ds.m)
    train = ds.subset(np.sort(perm[:n_train]))
    test = ds.subset(np.sort(perm[n_train:]))
    train.require_trainable()
    return train, test


def make_folds(ds: Dataset, k: int, seed: int) -> FoldPlan:
    if not 2 <= k <= ds.m:
        raise DataError(f"fold count k={k} out of range [2, {ds.m}]")
    perm = np.random.default_rng(seed).permutation(ds.m)
    # array_split puts the remainder in the leading folds, so sizes differ by <= 1
    parts = tuple(np.sort(p) for p in np.array_split(perm, k))
    return FoldPlan(k=k, assignments=parts)


def synth_2d(m_per_class: int, seed: int) -> Dataset:
    """Disk (label -1) versus surrounding annulus (label +1) in the plane.

    Class -1 has radius ``sqrt(u)``; class +1 has radius ``sqrt(3u + 1)``,
    so it fills the annulus between radii 1 and 2. Angles are uniform.
    """
    if m_per_class < 1:
        raise DataError(f"m_per_class must be >= 1, got {m_per_class}")
    rng = np.random.default_rng(seed)
    r_in = np.sqrt(rng.random(m_per_class))
    t_in = 2.0 * np.pi * rng.random(m_per_class)
    r_out = np.sqrt(3.0 * rng.random(m_per_class) + 1.0)
    t_out = 2.0 * np.pi * rng.random(m_per_class)
    X = np.vstack(
        [
            np.column_stack([r_in * np.cos(t_in), r_in * np.sin(t_in)]),
            np.column_stack([r_out * np.cos(t_out), r_out * np.sin(t_out)]),
        ]
    )
    y = np.concatenate([-np.ones(m_per_class), np.ones(m_per_class)])
    return Dataset(X, y)
