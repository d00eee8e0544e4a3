"""Fast built-in checks of the numerical core (``cls-ssl selftest``).

Closed-form values are recomputed here with plain ``math``; gradients are
compared against central finite differences.
"""
from __future__ import annotations

import math

import numpy as np

from . import labeling as lab
from . import losses
from .nn_core import cosine_lr, init_network, sgd_nesterov_step, OptimizerState, NetworkParams


def finite_difference(fn, params: NetworkParams, h=1e-4) -> np.ndarray:
    """Central differences of scalar ``fn(params)`` over every parameter entry."""
    grads = []
    for arr in params.arrays():
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = fn(params)
            arr[idx] = old - h
            down = fn(params)
            arr[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return np.concatenate([g.ravel() for g in grads])


def relative_error(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12))


def _gradient_checks(rng):
    params = init_network([2, 8, 3], rng)
    x = rng.normal(size=(5, 2))
    y = rng.integers(0, 3, size=5)
    probs = rng.dirichlet(np.ones(3), size=5)
    own = lab.labels_from_probs(probs, 1)
    other = lab.labels_from_probs(rng.dirichlet(np.full(3, 0.3), size=5), 2)

    class Cfg:
        lambda1, lambda2, tau = 2.0, 1.0, 0.3

    cases = {
        "supervised": lambda p, g=False: losses.supervised_loss(p, x, y, grad=g),
        "self-labeling": lambda p, g=False: losses.self_labeling_loss(p, x, own, grad=g),
        "co-labeling": lambda p, g=False: (
            losses.co_labeling_loss(p, x, other, 0.3, grad=g)[::2] if g
            else losses.co_labeling_loss(p, x, other, 0.3)[0]),
        "mixed": lambda p, g=False: (
            (lambda br: (br.total, br.grads) if g else br.total)(
                losses.mixed_loss(p, x, y, x, own, other, Cfg, grad=g))),
    }
    out = []
    for name, fn in cases.items():
        _, grads = fn(params, True)
        fd = finite_difference(fn, params)
        out.append((f"gradient {name}", relative_error(grads.flat(), fd) < 1e-3))
    return out


def checks():
    rng = np.random.default_rng(0)
    h99 = -(0.99 * math.log(0.99) + 0.01 * math.log(0.01))
    results = [
        ("pseudo label", lab.pseudo_label([0.1, 0.7, 0.2]) == 1),
        ("complementary label", lab.complementary_label([0.1, 0.7, 0.2]) == 0),
        ("threshold inclusive", list(lab.threshold_multi_hot([0.95, 0.05], 0.95)) == [1, 0]),
        ("sharpen", abs(lab.sharpen([0.8, 0.2], 0.5)[0] - 0.64 / 0.68) < 1e-9),
        ("sample weight", abs(lab.sample_weight([0.99, 0.01]) - (1 - h99 / math.log(2))) < 1e-9),
        ("positive ce", abs(losses.positive_ce([0.5, 0.5], 0, 1.0) - math.log(2)) < 1e-9),
        ("negative ce", abs(losses.negative_ce([0.1, 0.9], 1, 1.0) + math.log(0.1)) < 1e-9),
        ("cosine lr", abs(cosine_lr(10, 10, 0.03) - 0.03 * math.cos(7 * math.pi / 16)) < 1e-12),
    ]
    p = NetworkParams([np.ones((1, 1))], [np.zeros(1)])
    g = NetworkParams([np.full((1, 1), 0.5)], [np.zeros(1)])
    stepped, _ = sgd_nesterov_step(p, g, OptimizerState.for_params(p, 0.0, 0.0), 0.1)
    results.append(("plain sgd step", abs(stepped.weights[0][0, 0] - 0.95) < 1e-12))
    results.extend(_gradient_checks(rng))
    return results


def run_selftest(stream=None) -> bool:
    ok = True
    for name, passed in checks():
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}", file=stream)
    return ok
