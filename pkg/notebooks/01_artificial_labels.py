"""
Artificial labels and confidence weights
========================================

Every unlabeled sample gets two labels from a network's prediction on a
weakly augmented view: the most likely class (pseudo label) and the least
likely one (complementary label). Both carry a weight between 0 and 1 that
falls with the entropy of the prediction.
"""

# %%
import numpy as np

from cls_ssl import (
    complementary_label,
    pseudo_label,
    sample_weight,
    sharpen,
    threshold_multi_hot,
)

p = np.array([0.6, 0.3, 0.1])
print("pseudo", pseudo_label(p), "complementary", complementary_label(p))
print("weight", round(float(sample_weight(p)), 4))

# %%
# A confident prediction has a weight near 1 and a uniform one has weight 0.
for probs in ([0.99, 0.01], [0.75, 0.25], [0.5, 0.5]):
    print(probs, "->", round(float(sample_weight(probs)), 4))

# %%
# Sharpening with a temperature below 1 lowers the entropy, so the weight
# goes up while the argmax and argmin stay where they were.
sharp = sharpen(p, 0.5)
print(np.round(sharp, 4), pseudo_label(sharp), complementary_label(sharp))
print("weight before", round(float(sample_weight(p)), 4),
      "after", round(float(sample_weight(sharp)), 4))

# %%
# The thresholded one-hot used by the FixMatch-style baseline sets at most
# one bit once the threshold is above one half.
print(threshold_multi_hot([0.96, 0.04], 0.95), threshold_multi_hot([0.9, 0.1], 0.95))

# %%
# Weights of a batch of random predictions on ten classes. Only the samples
# whose weight clears the exchange threshold are passed to the peer network.
rng = np.random.default_rng(0)
batch = rng.dirichlet(np.full(10, 0.1), size=1000)
w = sample_weight(batch)
for tau in (0.5, 0.7, 0.85, 0.95):
    print(f"tau={tau:<5} exchanged {np.mean(w > tau):.3f}")
