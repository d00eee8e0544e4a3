"""Dual-network cross-labeling training loop, its ablations and baselines.

Each iteration draws ``B`` labeled and ``mu * B`` unlabeled samples.  Both
networks label the weak views of the unlabeled batch with their current
(pre-update) parameters; every network is then trained on its strong
views with its own labels and with the peer's labels whose weight clears
``tau``.  The two updates never see each other's new parameters.

The loop is single-threaded.  All randomness is split per network so the
two networks are interchangeable: swapping ``seeds`` swaps their metric
streams exactly.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .augment import AugmentPolicy, strong_augment, weak_augment
from .errors import ConfigurationError, NumericError, ShapeError
from .labeling import LabelBatch, generate_label_batch, labels_from_probs
from .losses import LossBreakdown, supervised_terms, mixed_loss, unlabeled_terms
from .metrics import MetricsRecord, diagnostics, evaluate
from .nn_core import (
    NetworkParams,
    OptimizerState,
    add_grads,
    backward,
    cosine_lr,
    forward_cached,
    init_network,
    sgd_nesterov_step,
)

CLS_VARIANTS = ("cls", "cls_no_nl", "cls_no_rw", "cls_no_cross")
FIXMATCH_VARIANTS = ("fixmatch", "fixmatch_nl", "fixmatch_rw", "fixmatch_nl_rw")
VARIANTS = CLS_VARIANTS + FIXMATCH_VARIANTS + ("supervised_only",)


@dataclass
class TrainConfig:
    variant: str = "cls"
    alpha: float = 0.03
    mu: int = 8
    B: int = 64
    T_total: int = 2000
    tau: float = 0.85
    lambda1: float = 2.0
    lambda2: float = 1.0
    gamma: float = 0.95
    epsilon: float = 0.5
    seeds: tuple = (1, 2)
    sampler_seed: int = 0
    hidden: tuple = (32, 32)
    momentum: float = 0.9
    weight_decay: float = 5e-4
    weak_noise: float = 0.05
    strong_noise: float = 0.2
    dropout: float = 0.2
    scale_jitter: float = 0.2
    labeled_aug: str = "weak"
    eval_every: int = 50
    ema_decay: float = 0.999
    diag_pool_size: int = 1024
    # train network 1 only; for the cls family this requires lambda2 == 0 or tau == 1
    solo: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; valid variants: "
                                     + ", ".join(VARIANTS))
        self.seeds = tuple(int(s) for s in self.seeds)
        self.hidden = tuple(int(h) for h in self.hidden)
        if len(self.seeds) != 2:
            raise ConfigurationError("exactly two seeds are required")
        if not self.alpha > 0:
            raise ConfigurationError("alpha must be positive")
        for name in ("mu", "B", "T_total", "eval_every"):
            value = getattr(self, name)
            if int(value) != value or value < (0 if name == "T_total" else 1):
                raise ConfigurationError(f"{name} must be a positive integer, got {value}")
            setattr(self, name, int(value))
        for name in ("tau", "gamma"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1]")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigurationError("loss coefficients must be >= 0")
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be > 0")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ConfigurationError("ema_decay must lie in [0, 1)")
        if self.labeled_aug not in ("none", "weak"):
            raise ConfigurationError("labeled_aug must be 'none' or 'weak'")
        if any(h < 1 for h in self.hidden):
            raise ConfigurationError("hidden layer widths must be >= 1")
        if self.diag_pool_size < 1:
            raise ConfigurationError("diag_pool_size must be >= 1")
        if self.variant == "cls_no_cross":
            self.lambda2 = 0.0
        if self.solo and self.variant in CLS_VARIANTS and not (self.lambda2 == 0 or self.tau == 1):
            raise ConfigurationError("a solo cls run needs lambda2 == 0 or tau == 1")

    @property
    def use_nl(self):
        return self.variant not in ("cls_no_nl", "fixmatch", "fixmatch_rw")

    @property
    def reweight(self):
        return self.variant not in ("cls_no_rw", "fixmatch", "fixmatch_nl")

    @property
    def two_networks(self):
        return self.variant in CLS_VARIANTS and not self.solo

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["seeds"], d["hidden"] = list(self.seeds), list(self.hidden)
        return d


class EpochSampler:
    """Indices from successive shuffled passes over ``range(n)``."""

    def __init__(self, n, rng: np.random.Generator):
        if n < 1:
            raise ConfigurationError("cannot sample from an empty set")
        self.n, self.rng = n, rng
        self._order = rng.permutation(n)
        self._pos = 0

    def next(self, k) -> np.ndarray:
        out = []
        while k:
            if self._pos == self.n:
                self._order, self._pos = self.rng.permutation(self.n), 0
            take = min(k, self.n - self._pos)
            out.append(self._order[self._pos:self._pos + take])
            self._pos += take
            k -= take
        return np.concatenate(out)


@dataclass
class TrainState:
    t: int
    params: list            # [net1, net2 or None]
    opt: list
    ema: list
    aug_rngs: list
    policy: AugmentPolicy
    last_loss: list = field(default_factory=lambda: [None, None])

    @property
    def n_active(self):
        return sum(p is not None for p in self.params)


def ema_update(ema: NetworkParams, params: NetworkParams, decay) -> NetworkParams:
    """Elementwise ``decay * ema + (1 - decay) * params``."""
    if not 0.0 <= decay < 1.0:
        raise ConfigurationError("EMA decay must lie in [0, 1)")
    if not ema.same_shape(params):
        raise ShapeError("EMA and parameters differ in shape")
    return NetworkParams([decay * e + (1 - decay) * p for e, p in zip(ema.weights, params.weights)],
                         [decay * e + (1 - decay) * p for e, p in zip(ema.biases, params.biases)])


def network_streams(seed):
    """Independent (init, augmentation) generators derived from one network seed."""
    init_ss, aug_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_ss), np.random.default_rng(aug_ss)


def init_state(config: TrainConfig, in_dim, n_classes, policy: AugmentPolicy) -> TrainState:
    arch = [in_dim, *config.hidden, n_classes]
    n_nets = 2 if config.two_networks else 1
    params, opt, ema, rngs = [None, None], [None, None], [None, None], [None, None]
    for b in range(n_nets):
        init_rng, aug_rng = network_streams(config.seeds[b])
        params[b] = init_network(arch, init_rng)
        opt[b] = OptimizerState.for_params(params[b], config.momentum, config.weight_decay)
        ema[b] = params[b].copy()
        rngs[b] = aug_rng
    return TrainState(0, params, opt, ema, rngs, policy)


def _check_finite(value, t):
    if not np.isfinite(value):
        raise NumericError(f"non-finite loss at iteration {t}", iteration=t)


def _labeled_view(x, config, policy, rng):
    return weak_augment(x, policy, rng) if config.labeled_aug == "weak" else x


def _apply_updates(state: TrainState, config: TrainConfig, grads):
    lr = cosine_lr(state.t, config.T_total, config.alpha)
    for b, g in enumerate(grads):
        if g is None:
            continue
        state.params[b], state.opt[b] = sgd_nesterov_step(state.params[b], g, state.opt[b], lr)
        state.ema[b] = ema_update(state.ema[b], state.params[b], config.ema_decay)
    state.t += 1
    return state


def train_step(state: TrainState, config: TrainConfig, labeled_batch, unlabeled_batch):
    """One cross-labeling iteration for the ``cls*`` variants."""
    x_l, y_l = labeled_batch
    x_u = np.asarray(unlabeled_batch, dtype=np.float64)
    policy = state.policy
    active = [b for b in (0, 1) if state.params[b] is not None]

    labels: list[LabelBatch | None] = [None, None]
    for b in active:
        x_weak = weak_augment(x_u, policy, state.aug_rngs[b])
        labels[b] = generate_label_batch(state.params[b], x_weak, b + 1)

    grads = [None, None]
    for b in active:
        rng = state.aug_rngs[b]
        x_strong = strong_augment(x_u, policy, rng)
        x_lab = _labeled_view(x_l, config, policy, rng)
        peer = labels[1 - b] if labels[1 - b] is not None else labels[b]
        br = mixed_loss(state.params[b], x_lab, y_l, x_strong, labels[b], peer, config,
                        grad=True)
        _check_finite(br.total, state.t)
        grads[b], br.grads = br.grads, None
        state.last_loss[b] = br
    return _apply_updates(state, config, grads)


def fixmatch_weights(probs_weak, gamma, reweight):
    """Per-sample weight: entropy confidence if ``reweight`` else 1 when ``max p >= gamma``."""
    if reweight:
        return labels_from_probs(probs_weak).weight
    return (probs_weak.max(axis=1) >= gamma).astype(np.float64)


def fixmatch_step(state: TrainState, config: TrainConfig, labeled_batch, unlabeled_batch):
    """Single-network baseline step (network 1 only), with optional NL and RW."""
    if config.variant not in FIXMATCH_VARIANTS:
        raise ConfigurationError(f"fixmatch_step does not handle {config.variant!r}")
    x_l, y_l = labeled_batch
    x_u = np.asarray(unlabeled_batch, dtype=np.float64)
    params, rng, policy = state.params[0], state.aug_rngs[0], state.policy

    x_weak = weak_augment(x_u, policy, rng)
    probs_weak, _ = forward_cached(params, x_weak)
    lab = labels_from_probs(probs_weak, 1)
    w = fixmatch_weights(probs_weak, config.gamma, config.reweight)

    x_strong = strong_augment(x_u, policy, rng)
    x_lab = _labeled_view(x_l, config, policy, rng)
    probs_l, cache_l = forward_cached(params, x_lab)
    sup, g_sup = supervised_terms(probs_l, y_l)
    probs_u, cache_u = forward_cached(params, x_strong)
    terms = unlabeled_terms(probs_u, lab.pseudo, lab.complementary, w, negative=config.use_nl)
    total = sup + config.lambda1 * terms.value
    _check_finite(total, state.t)
    grads = add_grads(backward(params, g_sup, cache_l),
                      backward(params, config.lambda1 * terms.grad_logits, cache_u))
    state.last_loss[0] = LossBreakdown(float(total), float(sup), float(terms.pos),
                                       float(terms.neg), 0.0, 0.0, 0)
    return _apply_updates(state, config, [grads, None])


def supervised_step(state: TrainState, config: TrainConfig, labeled_batch, unlabeled_batch=None):
    """Labeled loss only; the unlabeled batch is ignored."""
    x_l, y_l = labeled_batch
    params = state.params[0]
    x_lab = _labeled_view(x_l, config, state.policy, state.aug_rngs[0])
    probs, cache = forward_cached(params, x_lab)
    sup, g = supervised_terms(probs, y_l)
    _check_finite(sup, state.t)
    state.last_loss[0] = LossBreakdown(float(sup), float(sup), 0.0, 0.0, 0.0, 0.0, 0)
    return _apply_updates(state, config, [backward(params, g, cache), None])


def step_function(config: TrainConfig):
    if config.variant in CLS_VARIANTS:
        return train_step
    if config.variant in FIXMATCH_VARIANTS:
        return fixmatch_step
    return supervised_step


@dataclass
class TrainResult:
    params1: NetworkParams
    params2: NetworkParams | None
    ema1: NetworkParams
    ema2: NetworkParams | None
    metrics: list
    lr_trace: list


def _record(state: TrainState, config: TrainConfig, test_set, pool) -> MetricsRecord:
    p1, p2 = state.params
    e1, e2 = state.ema
    acc1 = evaluate(p1, test_set)
    acc2 = evaluate(p2, test_set) if p2 is not None else None
    diag = diagnostics(p1, p2, e1, pool, config.tau)
    lr = cosine_lr(state.t, config.T_total, config.alpha) if config.T_total else config.alpha
    rec = MetricsRecord(
        iteration=state.t, lr=lr, test_acc_net1=acc1, test_acc_net2=acc2,
        test_acc_mean=acc1 if acc2 is None else 0.5 * (acc1 + acc2),
        test_acc_ema=evaluate(e1, test_set), **diag,
        loss_net1=state.last_loss[0].as_dict() if state.last_loss[0] else None,
        loss_net2=state.last_loss[1].as_dict() if state.last_loss[1] else None,
    )
    if p2 is not None:
        rec.extra = {"test_acc_ema2": evaluate(e2, test_set),
                     "dist_theta2_ema2": diagnostics(p2, None, e2, pool, config.tau)[
                         "dist_theta1_ema"]}
    return rec


def train(config: TrainConfig, labeled_set, unlabeled_set, test_set, *, policy=None,
          on_record=None) -> TrainResult:
    """Run ``config.T_total`` iterations and evaluate every ``eval_every``.

    ``labeled_set`` and ``test_set`` need ``features``/``labels``;
    ``unlabeled_set`` only ``features``.  The augmentation policy defaults
    to noise proportional to the unlabeled features' spread.
    """
    x_u_all = np.asarray(unlabeled_set.features, dtype=np.float64)
    x_l_all = np.asarray(labeled_set.features, dtype=np.float64)
    y_l_all = np.asarray(labeled_set.labels)
    if len(x_l_all) == 0 or len(x_u_all) == 0 or len(test_set) == 0:
        raise ConfigurationError("labeled, unlabeled and test sets must be non-empty")
    if not (x_l_all.shape[1] == x_u_all.shape[1] == test_set.features.shape[1]):
        raise ConfigurationError("feature dimensions of the three sets disagree")
    n_classes = test_set.n_classes
    if policy is None:
        policy = AugmentPolicy.from_data(x_u_all, config.weak_noise, config.strong_noise,
                                         config.dropout, config.scale_jitter)

    state = init_state(config, x_u_all.shape[1], n_classes, policy)
    lab_rng, unl_rng, pool_rng = (np.random.default_rng(s) for s in
                                  np.random.SeedSequence(config.sampler_seed).spawn(3))
    lab_sampler = EpochSampler(len(x_l_all), lab_rng)
    unl_sampler = EpochSampler(len(x_u_all), unl_rng)
    pool_idx = np.sort(pool_rng.choice(len(x_u_all), size=min(config.diag_pool_size,
                                                               len(x_u_all)), replace=False))
    pool = x_u_all[pool_idx]
    step = step_function(config)

    metrics, lr_trace = [], []

    def log():
        rec = _record(state, config, test_set, pool)
        metrics.append(rec)
        if on_record is not None:
            on_record(rec)

    log()
    for t in range(config.T_total):
        li = lab_sampler.next(config.B)
        ui = unl_sampler.next(config.mu * config.B)
        lr_trace.append(cosine_lr(t, config.T_total, config.alpha))
        step(state, config, (x_l_all[li], y_l_all[li]), x_u_all[ui])
        if state.t % config.eval_every == 0 or state.t == config.T_total:
            log()
    return TrainResult(state.params[0], state.params[1], state.ema[0], state.ema[1],
                       metrics, lr_trace)
