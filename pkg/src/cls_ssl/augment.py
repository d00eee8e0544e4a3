"""Weak and strong perturbations for low-dimensional feature vectors.

The weak view adds a little Gaussian noise.  The strong view adds more
noise, zeroes random features and rescales the whole vector.  Noise
levels may be scalars or per-feature arrays (typically a multiple of the
per-feature data standard deviation, see :meth:`AugmentPolicy.from_data`).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class AugmentPolicy:
    weak_noise_std: float | np.ndarray = 0.05
    strong_noise_std: float | np.ndarray = 0.2
    strong_feature_dropout_prob: float = 0.2
    strong_scale_jitter: float = 0.2

    def __post_init__(self):
        weak = np.asarray(self.weak_noise_std)
        strong = np.asarray(self.strong_noise_std)
        if np.any(weak < 0) or np.any(strong < 0):
            raise ConfigurationError("noise standard deviations must be >= 0")
        if np.any(strong < weak):
            raise ConfigurationError("strong noise must be at least as large as weak noise")
        if not 0.0 <= self.strong_feature_dropout_prob <= 1.0:
            raise ConfigurationError("feature dropout probability must lie in [0, 1]")
        if self.strong_scale_jitter < 0:
            raise ConfigurationError("scale jitter must be >= 0")

    @classmethod
    def from_data(cls, features, weak_noise=0.05, strong_noise=0.2, dropout=0.2,
                  scale_jitter=0.2) -> "AugmentPolicy":
        """Noise levels expressed as fractions of each feature's standard deviation."""
        std = np.asarray(features, dtype=np.float64).std(axis=0)
        return cls(weak_noise * std, strong_noise * std, dropout, scale_jitter)


def weak_augment(x, policy: AugmentPolicy, rng: np.random.Generator) -> np.ndarray:
    """``x`` plus Gaussian noise; works on a single vector or a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    return x + rng.standard_normal(x.shape) * np.asarray(policy.weak_noise_std)


def strong_augment(x, policy: AugmentPolicy, rng: np.random.Generator) -> np.ndarray:
    """Noise, then per-feature dropout, then a global scale ``1 + u`` per sample."""
    x = np.asarray(x, dtype=np.float64)
    out = x + rng.standard_normal(x.shape) * np.asarray(policy.strong_noise_std)
    keep = rng.random(x.shape) >= policy.strong_feature_dropout_prob
    out = out * keep
    jitter = policy.strong_scale_jitter
    u = rng.uniform(-jitter, jitter, size=x.shape[:-1] + (1,))
    return out * (1.0 + u)
