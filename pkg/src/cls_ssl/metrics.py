"""Test accuracy and cross-labeling diagnostics."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .labeling import labels_from_probs
from .losses import exchange_gate
from .nn_core import NetworkParams, forward, param_distance


@dataclass
class MetricsRecord:
    """One evaluation snapshot.

    Fields that need the second network are ``None`` for single-network
    variants, and the loss fields are ``None`` before the first update.
    """

    iteration: int
    lr: float
    test_acc_net1: float
    test_acc_net2: float | None
    test_acc_mean: float
    test_acc_ema: float
    pl_overlap: float | None = None
    nl_overlap: float | None = None
    exchange_ratio: float | None = None
    dist_theta1_theta2: float | None = None
    dist_theta1_ema: float = 0.0
    loss_net1: dict | None = None
    loss_net2: dict | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d.update(d.pop("extra"))
        return d


def predict(params: NetworkParams, features) -> np.ndarray:
    return np.argmax(forward(params, np.atleast_2d(features)), axis=1)


def evaluate(params: NetworkParams, test_set) -> float:
    """Fraction of samples whose most probable class (lowest index on ties) is correct."""
    if len(test_set) == 0:
        raise ValueError("empty test set")
    return float(np.mean(predict(params, test_set.features) == test_set.labels))


def diagnostics(params1: NetworkParams, params2: NetworkParams | None, ema1: NetworkParams,
                pool, tau) -> dict:
    """Label agreement, exchange ratio and parameter distances on clean inputs.

    ``pool`` is a feature matrix (or anything with ``.features``).
    """
    X = getattr(pool, "features", pool)
    out = {"dist_theta1_ema": param_distance(params1, ema1)}
    if params2 is None:
        return out
    lab1 = labels_from_probs(forward(params1, X), 1)
    lab2 = labels_from_probs(forward(params2, X), 2)
    out.update(
        pl_overlap=float(np.mean(lab1.pseudo == lab2.pseudo)),
        nl_overlap=float(np.mean(lab1.complementary == lab2.complementary)),
        # net 1 consumes net 2's labels and vice versa
        exchange_ratio=float(0.5 * (exchange_gate(lab2.weight, tau).mean()
                                    + exchange_gate(lab1.weight, tau).mean())),
        dist_theta1_theta2=param_distance(params1, params2),
    )
    return out
