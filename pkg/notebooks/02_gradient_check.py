"""
Checking the hand-written gradients
===================================

All losses return exact parameter gradients from a manual backward pass.
Here they are compared with central finite differences on a small network.
"""

# %%
import numpy as np

from cls_ssl import init_network, self_labeling_loss, supervised_loss
from cls_ssl.labeling import labels_from_probs
from cls_ssl.selftest import finite_difference, relative_error, run_selftest

rng = np.random.default_rng(7)
params = init_network([2, 8, 3], seed=0)
x = rng.normal(size=(6, 2))
y = rng.integers(0, 3, size=6)

# %%
# Supervised negative log-likelihood.
loss, grads = supervised_loss(params, x, y, grad=True)
numeric = finite_difference(lambda p: supervised_loss(p, x, y), params)
print(f"loss {loss:.5f}  relative error {relative_error(grads.flat(), numeric):.2e}")

# %%
# Self-labeling loss: positive and negative cross-entropy with entropy weights.
labels = labels_from_probs(rng.dirichlet(np.ones(3), size=6), network_id=1)
loss, grads = self_labeling_loss(params, x, labels, grad=True)
numeric = finite_difference(lambda p: self_labeling_loss(p, x, labels), params)
print(f"loss {loss:.5f}  relative error {relative_error(grads.flat(), numeric):.2e}")

# %%
# The package ships the full set of checks behind ``cls-ssl selftest``.
run_selftest()
