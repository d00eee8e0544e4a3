"""Datasets, synthetic generators, CSV ingestion and the labeled/unlabeled split."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn import datasets as skd

from .errors import ConfigurationError, DataError


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with integer class labels in ``[0, n_classes)``."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    split: str = "full"

    def __post_init__(self):
        if self.features.ndim != 2 or len(self.features) < 1:
            raise DataError(f"features must be a non-empty 2-D array, got {self.features.shape}")
        if not np.isfinite(self.features).all():
            raise DataError("features contain non-finite values")
        if self.labels.shape != (len(self.features),):
            raise DataError("one label per row is required")
        if np.any(self.labels < 0) or np.any(self.labels >= self.n_classes):
            raise DataError(f"labels must lie in [0, {self.n_classes})")

    def __len__(self):
        return len(self.features)

    @property
    def dim(self):
        return self.features.shape[1]

    def subset(self, idx, split=None) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.n_classes, split or self.split)


@dataclass(frozen=True)
class UnlabeledView:
    """Training view of unlabeled samples.  Carries features only."""

    features: np.ndarray
    n_classes: int

    def __len__(self):
        return len(self.features)

    @property
    def dim(self):
        return self.features.shape[1]


def make_two_moons(n, noise_std=0.1, seed=0) -> Dataset:
    """Two interleaving half circles; class sizes differ by at most one."""
    if n < 2:
        raise ConfigurationError(f"two moons needs n >= 2, got {n}")
    X, y = skd.make_moons(n_samples=n, noise=noise_std or None, random_state=seed)
    return Dataset(X.astype(np.float64), y.astype(np.int64), 2, "full")


def make_blobs(n, centers, cluster_std=1.0, seed=0) -> Dataset:
    """Isotropic Gaussian clusters, one class per centre, balanced counts."""
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim != 2 or len(centers) < 2:
        raise ConfigurationError("need at least two centres given as a (K, D) array")
    if len(np.unique(centers, axis=0)) != len(centers):
        raise ConfigurationError("blob centres must be distinct")
    X, y = skd.make_blobs(n_samples=n, centers=centers, cluster_std=cluster_std,
                          random_state=seed)
    return Dataset(X.astype(np.float64), y.astype(np.int64), len(centers), "full")


def default_blob_centers(k=3, radius=3.0, dim=2):
    angles = 2 * np.pi * np.arange(k) / k
    c = np.zeros((k, dim))
    c[:, 0], c[:, 1] = radius * np.cos(angles), radius * np.sin(angles)
    return c


def load_csv(path, header=False, n_classes=None) -> Dataset:
    """Read ``D`` feature columns followed by one 0-indexed integer label column.

    Errors name the offending line (1-based, counting the header).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    rows, labels = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise DataError(f"{path}:{lineno}: need at least one feature and a label")
            if rows and len(row) - 1 != len(rows[0]):
                raise DataError(f"{path}:{lineno}: expected {len(rows[0]) + 1} columns, "
                                f"got {len(row)}")
            try:
                feats = [float(c) for c in row[:-1]]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric feature value in {row[:-1]}") \
                    from None
            try:
                label = int(row[-1].strip())
            except ValueError:
                raise DataError(f"{path}:{lineno}: label {row[-1]!r} is not an integer") from None
            if label < 0 or (n_classes is not None and label >= n_classes):
                raise DataError(f"{path}:{lineno}: label {label} out of range")
            if not np.all(np.isfinite(feats)):
                raise DataError(f"{path}:{lineno}: non-finite feature value")
            rows.append(feats)
            labels.append(label)
    if not rows:
        raise DataError(f"{path}: no data rows")
    y = np.array(labels, dtype=np.int64)
    C = n_classes if n_classes is not None else int(y.max()) + 1
    return Dataset(np.array(rows, dtype=np.float64), y, C, "full")


def split_ssl(dataset: Dataset, n_labeled, seed=0):
    """Class-balanced labeled subset; everything else becomes unlabeled.

    Returns ``(labeled, unlabeled_view, heldout_truth)``.  The held-out truth
    holds the true labels of the unlabeled rows, in the same order, and is
    meant only for evaluation.
    """
    C = dataset.n_classes
    if not 0 < n_labeled <= len(dataset):
        raise ConfigurationError(f"n_labeled must lie in [1, {len(dataset)}], got {n_labeled}")
    if n_labeled % C:
        raise ConfigurationError(f"n_labeled={n_labeled} is not divisible by {C} classes")
    per_class = n_labeled // C
    rng = np.random.default_rng(seed)
    chosen = []
    for c in range(C):
        members = np.flatnonzero(dataset.labels == c)
        if len(members) < per_class:
            raise ConfigurationError(f"class {c} has {len(members)} samples, "
                                     f"{per_class} labels requested")
        chosen.append(rng.choice(members, size=per_class, replace=False))
    labeled_idx = np.sort(np.concatenate(chosen))
    rest = np.setdiff1d(np.arange(len(dataset)), labeled_idx)
    labeled = dataset.subset(labeled_idx, "labeled")
    unlabeled = UnlabeledView(dataset.features[rest], C)
    return labeled, unlabeled, dataset.labels[rest].copy()


def train_test_split(dataset: Dataset, n_test, seed=0):
    if not 0 < n_test < len(dataset):
        raise ConfigurationError(f"n_test must lie in [1, {len(dataset) - 1}]")
    perm = np.random.default_rng(seed).permutation(len(dataset))
    return dataset.subset(np.sort(perm[n_test:]), "train"), dataset.subset(np.sort(perm[:n_test]),
                                                                          "test")


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, features):
        std = features.std(axis=0)
        return cls(features.mean(axis=0), np.where(std > 0, std, 1.0))

    def __call__(self, features):
        return (features - self.mean) / self.std
