"""
Cross labeling on two moons
===========================

Eight labeled points (four per class) and two thousand unlabeled ones.
Two networks with different seeds label the unlabeled data for themselves
and for each other. A labeled-only baseline shows what the unlabeled data
is worth.
"""

# %%
from cls_ssl import TrainConfig, train
from cls_ssl.harness import build_data, resolve_settings

data = build_data(resolve_settings({}))
print(data.description)

# %%
baseline = train(TrainConfig(variant="supervised_only"), data.labeled, data.unlabeled, data.test)
print("labeled only:", baseline.metrics[-1].test_acc_net1)

# %%
result = train(TrainConfig(variant="cls"), data.labeled, data.unlabeled, data.test)
print(f"{'iter':>5} {'acc':>6} {'pl agree':>8} {'exchange':>8} {'|t1-t2|':>8} {'|t1-ema|':>8}")
for m in result.metrics[::5]:
    print(f"{m.iteration:>5} {m.test_acc_mean:>6.3f} {m.pl_overlap:>8.3f} "
          f"{m.exchange_ratio:>8.3f} {m.dist_theta1_theta2:>8.2f} {m.dist_theta1_ema:>8.2f}")

# %%
# The networks come to agree on almost every pseudo label and share most of
# them, yet their parameters stay far apart compared with how far a network
# drifts from its own moving average.
final = result.metrics[-1]
print("net1", final.test_acc_net1, "net2", final.test_acc_net2, "ema", final.test_acc_ema)
