"""Cross-labeling supervision for semi-supervised classification, in numpy.

Two independently initialised MLPs label weak views of unlabeled samples
with pseudo labels, complementary labels and entropy-based confidence
weights, learn from their own labels on strong views, and borrow the
peer's labels whose weight clears a threshold.
"""
from .augment import AugmentPolicy, strong_augment, weak_augment
from .data import Dataset, UnlabeledView, load_csv, make_blobs, make_two_moons, split_ssl
from .errors import ConfigurationError, DataError, NumericError, ShapeError
from .labeling import (
    ArtificialLabel,
    LabelBatch,
    complementary_label,
    generate_label_batch,
    generate_labels,
    pseudo_label,
    sample_weight,
    sharpen,
    threshold_multi_hot,
)
from .losses import (
    LossBreakdown,
    co_labeling_loss,
    mixed_loss,
    negative_ce,
    positive_ce,
    self_labeling_loss,
    supervised_loss,
)
from .metrics import MetricsRecord, diagnostics, evaluate
from .nn_core import (
    NetworkParams,
    OptimizerState,
    backward,
    cosine_lr,
    forward,
    forward_cached,
    init_network,
    sgd_nesterov_step,
)
from .trainer import VARIANTS, TrainConfig, TrainResult, ema_update, train

__version__ = "0.1.0"
