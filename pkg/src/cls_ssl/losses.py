"""Weighted positive/negative cross-entropy and the losses built from them.

Every batch-level loss can also return its exact gradient with respect to
the network parameters (``grad=True``).  Gradients only ever flow through
the predictions of the network being trained; artificial labels and
their weights are treated as constants.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError, ShapeError
from .labeling import LabelBatch
from .nn_core import PROB_FLOOR, NetworkParams, add_grads, backward, forward_cached


def _clamp(p):
    return np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)


def _check_index(p, cls):
    C = np.shape(p)[-1]
    if np.any(np.asarray(cls) < 0) or np.any(np.asarray(cls) >= C):
        raise ShapeError(f"class index {cls} out of range for {C} classes")


def positive_ce(p, pseudo_class, w) -> float:
    """``-w log p[pseudo_class]``."""
    _check_index(p, pseudo_class)
    return float(-w * np.log(_clamp(np.asarray(p, dtype=np.float64)[pseudo_class])))


def negative_ce(p, complementary_class, w) -> float:
    """``-w log(1 - p[complementary_class])``."""
    _check_index(p, complementary_class)
    return float(-w * np.log(_clamp(1.0 - np.asarray(p, dtype=np.float64)[complementary_class])))


# Batched terms.  Each returns per-sample values and dL/dlogits for the
# softmax output ``probs`` (one row per sample, before any batch averaging).

def _positive_terms(probs, cls, w):
    rows = np.arange(len(probs))
    values = -w * np.log(_clamp(probs[rows, cls]))
    g = probs.copy()
    g[rows, cls] -= 1.0
    return values, w[:, None] * g


def _negative_terms(probs, cls, w):
    rows = np.arange(len(probs))
    pc = probs[rows, cls]
    one_minus = _clamp(1.0 - pc)
    values = -w * np.log(one_minus)
    # d/dz_j [-log(1 - p_c)] = p_c (delta_jc - p_j) / (1 - p_c)
    g = -probs * pc[:, None]
    g[rows, cls] += pc
    return values, (w / one_minus)[:, None] * g


def weighted_ce_loss(params: NetworkParams, x, classes, weights, *, negative=False, grad=False):
    """Batch mean of :func:`positive_ce` (or :func:`negative_ce`) on the network's output."""
    probs, cache = forward_cached(params, x)
    classes = np.asarray(classes)
    _check_index(probs, classes)
    w = np.asarray(weights, dtype=np.float64)
    values, g = (_negative_terms if negative else _positive_terms)(probs, classes, w)
    n = len(probs)
    return _finish(values.sum() / n, cache, g / n, grad, params)


@dataclass
class UnlabeledTerms:
    pos: float
    neg: float
    grad_logits: np.ndarray
    count: int

    @property
    def value(self):
        return self.pos + self.neg


def unlabeled_terms(probs, pseudo, complementary, weights, gate=None, negative=True):
    """Mean over the batch of gated, weighted positive and negative terms.

    ``gate`` is a 0/1 mask; gated-out samples stay in the denominator.
    """
    n = len(probs)
    if not (len(pseudo) == len(complementary) == len(weights) == n):
        raise ShapeError(f"batch of {n} predictions but {len(pseudo)} labels")
    if n == 0:
        raise ShapeError("empty unlabeled batch")
    _check_index(probs, pseudo)
    _check_index(probs, complementary)
    w = np.asarray(weights, dtype=np.float64)
    if gate is not None:
        w = w * gate
    pos, g = _positive_terms(probs, pseudo, w)
    neg_sum = 0.0
    if negative:
        neg, g_neg = _negative_terms(probs, complementary, w)
        g = g + g_neg
        neg_sum = neg.sum()
    count = n if gate is None else int(np.count_nonzero(gate))
    return UnlabeledTerms(pos.sum() / n, neg_sum / n, g / n, count)


def _labels(labels) -> LabelBatch:
    return LabelBatch.from_labels(labels)


def _finish(value, probs_cache, grad_logits, grad, params):
    if not grad:
        return value
    return value, backward(params, grad_logits, probs_cache)


def self_labeling_loss(params: NetworkParams, strong_batch, labels, *, negative=True,
                       unit_weights=False, grad=False):
    """Weighted pseudo + complementary cross-entropy of a network on its own labels.

    ``labels`` come from the same network's weak views of ``strong_batch``.
    """
    lab = _labels(labels)
    probs, cache = forward_cached(params, strong_batch)
    w = np.ones(len(lab)) if unit_weights else lab.weight
    terms = unlabeled_terms(probs, lab.pseudo, lab.complementary, w, negative=negative)
    return _finish(terms.value, cache, terms.grad_logits, grad, params)


def exchange_gate(weights, tau) -> np.ndarray:
    """1 where the peer's weight strictly exceeds ``tau``."""
    if not 0.0 <= tau <= 1.0:
        raise ConfigurationError(f"tau must lie in [0, 1], got {tau}")
    return (np.asarray(weights) > tau).astype(np.float64)


def co_labeling_loss(params: NetworkParams, strong_batch, labels_other, tau, *, negative=True,
                     unit_weights=False, grad=False):
    """Same loss as self-labeling but on the peer's labels, gated by ``w > tau``.

    Returns ``(loss, exchanged_count)`` or ``(loss, exchanged_count, grads)``.
    The gate always reads the peer's true weight even when ``unit_weights``
    replaces the loss weight by 1.
    """
    lab = _labels(labels_other)
    gate = exchange_gate(lab.weight, tau)
    probs, cache = forward_cached(params, strong_batch)
    w = np.ones(len(lab)) if unit_weights else lab.weight
    terms = unlabeled_terms(probs, lab.pseudo, lab.complementary, w, gate, negative)
    if not grad:
        return terms.value, terms.count
    return terms.value, terms.count, backward(params, terms.grad_logits, cache)


def supervised_terms(probs, y):
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != len(probs):
        raise ShapeError(f"{len(probs)} predictions but labels of shape {y.shape}")
    if len(y) == 0:
        raise ShapeError("empty labeled batch")
    if np.any(y < 0) or np.any(y >= probs.shape[1]):
        raise DataError(f"labels must lie in [0, {probs.shape[1]})")
    n = len(y)
    values, g = _positive_terms(probs, y, np.ones(n))
    return values.sum() / n, g / n


def supervised_loss(params: NetworkParams, x, y, *, grad=False):
    """Mean negative log-likelihood of the true classes."""
    probs, cache = forward_cached(params, x)
    value, g = supervised_terms(probs, y)
    return _finish(value, cache, g, grad, params)


@dataclass
class LossBreakdown:
    total: float
    sup: float
    self_pos: float
    self_neg: float
    co_pos: float
    co_neg: float
    exchanged_count: int
    grads: NetworkParams | None = None

    def as_dict(self):
        return {"total": self.total, "sup": self.sup, "self_pos": self.self_pos,
                "self_neg": self.self_neg, "co_pos": self.co_pos, "co_neg": self.co_neg,
                "exchanged_count": self.exchanged_count}


def mixed_loss(params: NetworkParams, labeled_x, labeled_y, unlabeled_strong, own_labels,
               other_labels, config, *, grad=False) -> LossBreakdown:
    """``L_sup + lambda1 L_self + lambda2 L_co`` for one network.

    ``config`` needs ``lambda1``, ``lambda2`` and ``tau``; optional boolean
    attributes ``use_nl`` (default True) and ``reweight`` (default True)
    select the ablations.  Both unlabeled losses average over the actual
    unlabeled batch.
    """
    lam1, lam2, tau = config.lambda1, config.lambda2, config.tau
    negative = getattr(config, "use_nl", True)
    unit = not getattr(config, "reweight", True)

    probs_l, cache_l = forward_cached(params, labeled_x)
    sup, g_sup = supervised_terms(probs_l, labeled_y)

    own, other = _labels(own_labels), _labels(other_labels)
    probs_u, cache_u = forward_cached(params, unlabeled_strong)
    ones = np.ones(len(probs_u))
    self_t = unlabeled_terms(probs_u, own.pseudo, own.complementary,
                             ones if unit else own.weight, negative=negative)
    gate = exchange_gate(other.weight, tau)
    co_t = unlabeled_terms(probs_u, other.pseudo, other.complementary,
                           ones if unit else other.weight, gate, negative)

    total = mixed_total(sup, self_t.value, co_t.value, lam1, lam2)
    out = LossBreakdown(float(total), float(sup), float(self_t.pos), float(self_t.neg),
                        float(co_t.pos), float(co_t.neg), co_t.count)
    if grad:
        g_u = lam1 * self_t.grad_logits + lam2 * co_t.grad_logits
        out.grads = add_grads(backward(params, g_sup, cache_l), backward(params, g_u, cache_u))
    return out


def mixed_total(sup, self_loss, co_loss, lambda1, lambda2):
    return sup + lambda1 * self_loss + lambda2 * co_loss
