"""Artificial labels: pseudo/complementary classes and confidence weights.

All functions accept a single distribution (1-D) or a batch (2-D, one row
per sample).  Ties in argmax/argmin resolve to the lowest class index,
which is what ``np.argmax``/``np.argmin`` already do.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ShapeError
from .nn_core import NetworkParams, forward


@dataclass(frozen=True)
class ArtificialLabel:
    pseudo_class: int
    complementary_class: int
    weight: float
    network_id: int


@dataclass(frozen=True)
class LabelBatch:
    """Labels for a batch of unlabeled samples, as parallel arrays."""

    pseudo: np.ndarray
    complementary: np.ndarray
    weight: np.ndarray
    network_id: int

    def __len__(self):
        return len(self.pseudo)

    def __getitem__(self, i) -> ArtificialLabel:
        return ArtificialLabel(int(self.pseudo[i]), int(self.complementary[i]),
                               float(self.weight[i]), self.network_id)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_labels(cls, labels) -> "LabelBatch":
        if isinstance(labels, LabelBatch):
            return labels
        labels = list(labels)
        ids = {lab.network_id for lab in labels}
        return cls(np.array([lab.pseudo_class for lab in labels], dtype=np.int64),
                   np.array([lab.complementary_class for lab in labels], dtype=np.int64),
                   np.array([lab.weight for lab in labels], dtype=np.float64),
                   ids.pop() if len(ids) == 1 else 0)


def _probs(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim not in (1, 2) or p.shape[-1] < 1:
        raise ShapeError(f"expected a probability vector or batch, got shape {p.shape}")
    return p


def pseudo_label(p):
    """Most probable class."""
    p = _probs(p)
    idx = np.argmax(p, axis=-1)
    return int(idx) if p.ndim == 1 else idx


def complementary_label(p):
    """Least probable class."""
    p = _probs(p)
    idx = np.argmin(p, axis=-1)
    return int(idx) if p.ndim == 1 else idx


def threshold_multi_hot(p, gamma) -> np.ndarray:
    """0/1 indicator of classes whose probability reaches ``gamma`` (inclusive)."""
    if not 0.0 <= gamma <= 1.0:
        raise ConfigurationError(f"gamma must lie in [0, 1], got {gamma}")
    return (_probs(p) >= gamma).astype(np.int64)


def sharpen(p, epsilon) -> np.ndarray:
    """Temperature sharpening ``p**(1/epsilon)``, renormalised.

    Computed in log space so tiny temperatures do not underflow to 0/0.
    """
    if not epsilon > 0:
        raise ConfigurationError(f"sharpening temperature must be > 0, got {epsilon}")
    p = _probs(p)
    with np.errstate(divide="ignore"):
        logp = np.log(p) / epsilon
    logp = logp - logp.max(axis=-1, keepdims=True)
    q = np.exp(logp)
    return q / q.sum(axis=-1, keepdims=True)


def entropy(p) -> np.ndarray | float:
    """Shannon entropy in nats with ``0 log 0 = 0``."""
    p = _probs(p)
    terms = np.where(p > 0, -p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    h = terms.sum(axis=-1)
    return float(h) if p.ndim == 1 else h


def sample_weight(p):
    """Confidence weight ``1 - H(p) / log C``, clipped into [0, 1]."""
    p = _probs(p)
    C = p.shape[-1]
    if C < 2:
        raise ConfigurationError("sample weight is undefined for a single class")
    w = np.clip(1.0 - np.asarray(entropy(p)) / np.log(C), 0.0, 1.0)
    return float(w) if p.ndim == 1 else w


def labels_from_probs(probs: np.ndarray, network_id: int = 0) -> LabelBatch:
    probs = np.atleast_2d(_probs(probs))
    return LabelBatch(np.argmax(probs, axis=1), np.argmin(probs, axis=1),
                      sample_weight(probs), network_id)


def generate_label_batch(params: NetworkParams, x_weak, network_id: int) -> LabelBatch:
    """Labels for a batch of already weakly-augmented samples.

    Only a forward pass is taken, so the returned labels are plain constants.
    """
    x_weak = np.asarray(x_weak, dtype=np.float64)
    return labels_from_probs(forward(params, np.atleast_2d(x_weak)), network_id)


def generate_labels(params: NetworkParams, x_weak, network_id: int) -> ArtificialLabel:
    """Pseudo label, complementary label and weight for one weak view."""
    return generate_label_batch(params, np.asarray(x_weak)[None, :], network_id)[0]
