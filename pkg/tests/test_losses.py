import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cls_ssl.errors import ConfigurationError, DataError, ShapeError
from cls_ssl.labeling import ArtificialLabel, LabelBatch, labels_from_probs
from cls_ssl.losses import (
    co_labeling_loss,
    mixed_loss,
    mixed_total,
    negative_ce,
    positive_ce,
    self_labeling_loss,
    supervised_loss,
    weighted_ce_loss,
)
from cls_ssl.nn_core import NetworkParams, OptimizerState, forward, init_network, sgd_nesterov_step
from oracles import fd_gradient, rel_err


def const_net(probs, dim=2):
    """Network whose softmax output is ``probs`` regardless of input."""
    return NetworkParams([np.zeros((len(probs), dim))], [np.log(np.asarray(probs, float))])


def labels(pseudo, comp, weights, nid=1):
    return LabelBatch(np.asarray(pseudo), np.asarray(comp), np.asarray(weights, float), nid)


def cfg(**kw):
    base = dict(lambda1=2.0, lambda2=1.0, tau=0.85)
    base.update(kw)
    return SimpleNamespace(**base)


class TestPositiveNegative:
    def test_zero_weight(self, rng):
        p = rng.dirichlet(np.ones(4))
        assert positive_ce(p, 2, 0.0) == 0.0
        assert negative_ce(p, 2, 0.0) == 0.0

    def test_half_probability(self):
        assert positive_ce([0.5, 0.5], 0, 1.0) == pytest.approx(math.log(2), abs=1e-9)
        assert positive_ce([0.5, 0.5], 0, 0.5) == pytest.approx(0.346574, abs=1e-6)
        assert positive_ce([0.5, 0.5], 0, 0.5) == pytest.approx(math.log(2) / 2, abs=1e-9)
        assert negative_ce([0.5, 0.5], 1, 1.0) == pytest.approx(math.log(2), abs=1e-9)

    def test_negative_vanishes(self):
        assert negative_ce([1.0, 0.0], 1, 1.0) == pytest.approx(0.0, abs=1e-9)

    def test_negative_high_mass(self):
        assert negative_ce([0.1, 0.9], 1, 1.0) == pytest.approx(-math.log(0.1), abs=1e-9)
        assert negative_ce([0.1, 0.9], 1, 1.0) == pytest.approx(2.302585, abs=1e-6)

    def test_clamped_at_extremes(self):
        assert np.isfinite(positive_ce([1.0, 0.0], 1, 1.0))
        assert np.isfinite(negative_ce([1.0, 0.0], 0, 1.0))

    def test_index_out_of_range(self):
        with pytest.raises(ShapeError):
            positive_ce([0.5, 0.5], 2, 1.0)
        with pytest.raises(ShapeError):
            negative_ce([0.5, 0.5], -1, 1.0)


class TestSelfLabeling:
    def test_zero_weights(self, rng):
        p = init_network([2, 6, 3], 0)
        x = rng.normal(size=(5, 2))
        loss, grads = self_labeling_loss(p, x, labels([0] * 5, [1] * 5, [0] * 5), grad=True)
        assert loss == 0.0 and not grads.flat().any()

    def test_two_halves(self):
        net = const_net([0.5, 0.5])
        loss = self_labeling_loss(net, np.zeros((1, 2)), [ArtificialLabel(0, 1, 1.0, 1)])
        assert loss == pytest.approx(2 * math.log(2), abs=1e-9)
        assert loss == pytest.approx(1.386294, abs=1e-6)

    def test_duplication_invariant(self, rng):
        p = init_network([2, 6, 3], 1)
        x = rng.normal(size=(4, 2))
        lab = labels_from_probs(rng.dirichlet(np.ones(3), size=4), 1)
        doubled = LabelBatch(*(np.tile(a, 2) for a in (lab.pseudo, lab.complementary,
                                                      lab.weight)), 1)
        assert self_labeling_loss(p, np.vstack([x, x]), doubled) == pytest.approx(
            self_labeling_loss(p, x, lab), abs=1e-12)

    def test_length_mismatch(self, rng):
        with pytest.raises(ShapeError):
            self_labeling_loss(init_network([2, 3, 2], 0), rng.normal(size=(3, 2)),
                               labels([0, 0], [1, 1], [1, 1]))


class TestCoLabeling:
    def test_tau_one_closes_gate(self, rng):
        p = init_network([2, 6, 3], 0)
        x = rng.normal(size=(8, 2))
        # saturated softmax rounds some weights to exactly 1.0; the strict gate still closes
        lab = labels_from_probs(forward(init_network([2, 6, 3], 9), x * 50), 2)
        assert lab.weight.max() == 1.0
        loss, count = co_labeling_loss(p, x, lab, 1.0)
        assert loss == 0.0 and count == 0

    def test_open_gate_equals_self_loss(self, rng):
        p = init_network([2, 6, 3], 0)
        x = rng.normal(size=(5, 2))
        lab = labels(rng.integers(0, 3, 5), [(i + 1) % 3 for i in rng.integers(0, 3, 5)],
                     [0.9] * 5, 2)
        loss, count = co_labeling_loss(p, x, lab, 0.85)
        assert count == 5
        assert loss == pytest.approx(self_labeling_loss(p, x, lab), abs=1e-15)

    def test_gated_mean_hand_evaluation(self, rng):
        p = init_network([2, 6, 3], 2)
        x = rng.normal(size=(2, 2))
        lab = labels([0, 1], [2, 0], [0.9, 0.5], 2)
        probs = forward(p, x)
        expected = (-0.9 * math.log(probs[0, 0]) - 0.9 * math.log(1 - probs[0, 2])) / 2
        loss, count = co_labeling_loss(p, x, lab, 0.85)
        assert count == 1
        assert loss == pytest.approx(expected, abs=1e-12)

    def test_strict_inequality(self, rng):
        _, count = co_labeling_loss(init_network([2, 3, 2], 0), rng.normal(size=(1, 2)),
                                    labels([0], [1], [0.85]), 0.85)
        assert count == 0

    @pytest.mark.parametrize("tau", [-0.01, 1.01])
    def test_bad_tau(self, rng, tau):
        with pytest.raises(ConfigurationError):
            co_labeling_loss(init_network([2, 3, 2], 0), rng.normal(size=(1, 2)),
                             labels([0], [1], [0.5]), tau)

    def test_unit_weights_keep_true_gate(self, rng):
        p = init_network([2, 6, 3], 0)
        x = rng.normal(size=(2, 2))
        lab = labels([0, 1], [2, 0], [0.9, 0.5], 2)
        _, count = co_labeling_loss(p, x, lab, 0.85, unit_weights=True)
        unit_lab = labels([0, 1], [2, 0], [1.0, 0.0], 2)
        assert count == 1
        assert co_labeling_loss(p, x, lab, 0.85, unit_weights=True)[0] == pytest.approx(
            co_labeling_loss(p, x, unit_lab, 0.85)[0] * 1.0, abs=1e-15)


class TestSupervised:
    def test_perfect_prediction(self):
        net = const_net([1 - 1e-15, 1e-15])
        assert supervised_loss(net, np.zeros((3, 2)), np.zeros(3, int)) == pytest.approx(
            0.0, abs=1e-9)

    def test_uniform_ten_classes(self):
        net = const_net(np.full(10, 0.1))
        assert supervised_loss(net, np.zeros((4, 2)), np.arange(4)) == pytest.approx(
            math.log(10), abs=1e-9)

    def test_batch_mean(self, rng):
        p = init_network([2, 6, 3], 0)
        x, y = rng.normal(size=(5, 2)), rng.integers(0, 3, 5)
        singles = [supervised_loss(p, x[i:i + 1], y[i:i + 1]) for i in range(5)]
        assert supervised_loss(p, x, y) == pytest.approx(np.mean(singles), abs=1e-12)

    def test_bad_label(self, rng):
        with pytest.raises(DataError):
            supervised_loss(init_network([2, 3, 2], 0), rng.normal(size=(1, 2)), [2])


class TestMixed:
    def _setup(self, rng):
        p = init_network([2, 6, 3], 0)
        xl, yl = rng.normal(size=(4, 2)), rng.integers(0, 3, 4)
        xu = rng.normal(size=(8, 2))
        own = labels_from_probs(rng.dirichlet(np.ones(3), size=8), 1)
        other = labels_from_probs(rng.dirichlet(np.full(3, 0.2), size=8), 2)
        return p, xl, yl, xu, own, other

    def test_zero_lambdas(self, rng):
        p, xl, yl, xu, own, other = self._setup(rng)
        br = mixed_loss(p, xl, yl, xu, own, other, cfg(lambda1=0.0, lambda2=0.0))
        assert br.total == pytest.approx(supervised_loss(p, xl, yl), abs=1e-15)

    def test_breakdown_consistent(self, rng):
        p, xl, yl, xu, own, other = self._setup(rng)
        c = cfg(tau=0.3)
        br = mixed_loss(p, xl, yl, xu, own, other, c)
        assert br.total == pytest.approx(
            br.sup + 2.0 * (br.self_pos + br.self_neg) + 1.0 * (br.co_pos + br.co_neg), abs=1e-9)
        assert br.self_pos + br.self_neg == pytest.approx(self_labeling_loss(p, xu, own),
                                                          abs=1e-12)
        co, count = co_labeling_loss(p, xu, other, 0.3)
        assert br.co_pos + br.co_neg == pytest.approx(co, abs=1e-12)
        assert br.exchanged_count == count

    def test_no_cross(self, rng):
        p, xl, yl, xu, own, other = self._setup(rng)
        br = mixed_loss(p, xl, yl, xu, own, other, cfg(lambda2=0.0, tau=0.0))
        assert br.total == pytest.approx(
            supervised_loss(p, xl, yl) + 2.0 * self_labeling_loss(p, xu, own), abs=1e-12)

    def test_combination_arithmetic(self):
        assert mixed_total(1.0, 0.5, 0.25, 2.0, 1.0) == 2.25

    def test_nl_switch(self, rng):
        p, xl, yl, xu, own, other = self._setup(rng)
        br = mixed_loss(p, xl, yl, xu, own, other, cfg(use_nl=False, tau=0.0))
        assert br.self_neg == 0.0 and br.co_neg == 0.0


# Gradient checks: exact analytical parameter gradients vs central differences.

def grad_cases(rng):
    p = init_network([2, 8, 3], int(rng.integers(1 << 30)))
    x = rng.normal(size=(5, 2))
    y = rng.integers(0, 3, 5)
    own = labels_from_probs(rng.dirichlet(np.ones(3), size=5), 1)
    other = labels_from_probs(rng.dirichlet(np.full(3, 0.3), size=5), 2)
    w = rng.uniform(0, 1, 5)
    c = cfg(tau=0.2)
    cases = {
        "positive": lambda g=False: weighted_ce_loss(p, x, own.pseudo, w, grad=g),
        "negative": lambda g=False: weighted_ce_loss(p, x, own.complementary, w, negative=True,
                                                     grad=g),
        "self": lambda g=False: self_labeling_loss(p, x, own, grad=g),
        "co": lambda g=False: (co_labeling_loss(p, x, other, 0.2, grad=True)[::2] if g
                               else co_labeling_loss(p, x, other, 0.2)[0]),
        "supervised": lambda g=False: supervised_loss(p, x, y, grad=g),
        "mixed": lambda g=False: ((lambda b: (b.total, b.grads))(
            mixed_loss(p, x, y, x[::-1], own, other, c, grad=True)) if g
            else mixed_loss(p, x, y, x[::-1], own, other, c).total),
    }
    return p, cases


@pytest.mark.parametrize("name", ["positive", "negative", "self", "co", "supervised", "mixed"])
def test_gradient_matches_finite_differences(name, rng):
    p, cases = grad_cases(rng)
    fn = cases[name]
    _, grads = fn(True)
    fd = fd_gradient(fn, p.arrays())
    assert rel_err(grads.flat(), fd) < 1e-3


@pytest.mark.invariant
class TestLossInvariants:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.floats(0.1, 10.0))
    def test_linear_in_weights(self, seed, scale):
        r = np.random.default_rng(seed)
        p = init_network([2, 5, 3], seed)
        x = r.normal(size=(6, 2))
        lab = labels_from_probs(r.dirichlet(np.ones(3), size=6), 1)
        scaled = LabelBatch(lab.pseudo, lab.complementary, lab.weight * scale, 1)
        assert self_labeling_loss(p, x, scaled) == pytest.approx(
            scale * self_labeling_loss(p, x, lab), rel=1e-12)
        # gate reads the weights too, so compare with tau = 0 on strictly positive weights
        assert co_labeling_loss(p, x, scaled, 0.0)[0] == pytest.approx(
            scale * co_labeling_loss(p, x, lab, 0.0)[0], rel=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31))
    def test_components_non_negative(self, seed):
        r = np.random.default_rng(seed)
        p = init_network([2, 5, 3], seed)
        x = r.normal(size=(6, 2)) * 20
        own = labels_from_probs(r.dirichlet(np.ones(3), size=6), 1)
        other = labels_from_probs(r.dirichlet(np.ones(3), size=6), 2)
        br = mixed_loss(p, x[:3], r.integers(0, 3, 3), x, own, other, cfg(tau=0.1))
        assert min(br.total, br.sup, br.self_pos, br.self_neg, br.co_pos, br.co_neg) >= 0

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31))
    def test_gradient_direction(self, seed):
        r = np.random.default_rng(seed)
        p = init_network([2, 6, 3], seed)
        x = r.normal(size=(1, 2))
        before = forward(p, x)[0]
        target, comp = int(np.argmin(before)), int(np.argmax(before))
        zero_mom = OptimizerState.for_params(p, 0.0, 0.0)
        _, g = weighted_ce_loss(p, x, [target], [1.0], grad=True)
        up, _ = sgd_nesterov_step(p, g, zero_mom, 1e-3)
        assert forward(up, x)[0][target] > before[target]
        _, g = weighted_ce_loss(p, x, [comp], [1.0], negative=True, grad=True)
        down, _ = sgd_nesterov_step(p, g, zero_mom, 1e-3)
        assert forward(down, x)[0][comp] < before[comp]

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31))
    def test_gate_monotone_in_tau(self, seed):
        r = np.random.default_rng(seed)
        p = init_network([2, 5, 3], seed)
        x = r.normal(size=(10, 2))
        lab = labels_from_probs(r.dirichlet(np.full(3, 0.3), size=10), 2)
        counts = [co_labeling_loss(p, x, lab, tau)[1] for tau in np.linspace(0, 1, 21)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 4))
    def test_duplication_invariance(self, seed, k):
        r = np.random.default_rng(seed)
        p = init_network([2, 5, 3], seed)
        x = r.normal(size=(3, 2))
        lab = labels_from_probs(r.dirichlet(np.ones(3), size=3), 2)
        rep = LabelBatch(*(np.tile(a, k) for a in (lab.pseudo, lab.complementary, lab.weight)), 2)
        assert co_labeling_loss(p, np.tile(x, (k, 1)), rep, 0.1)[0] == pytest.approx(
            co_labeling_loss(p, x, lab, 0.1)[0], abs=1e-12)
        assert self_labeling_loss(p, np.tile(x, (k, 1)), rep) == pytest.approx(
            self_labeling_loss(p, x, lab), abs=1e-12)

    @settings(max_examples=5, deadline=None)
    @given(st.integers(0, 2**31))
    def test_all_gradients_match_finite_differences(self, seed):
        r = np.random.default_rng(seed)
        p, cases = grad_cases(r)
        for fn in cases.values():
            assert rel_err(fn(True)[1].flat(), fd_gradient(fn, p.arrays())) < 1e-3
