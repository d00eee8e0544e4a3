"""
Ablation sweep
==============

The ``sweep`` entry point runs several variants over a few seed pairs on
one fixed data split and prints mean and spread of the final accuracy.
Two runs per variant keep this quick; the acceptance suite uses five.
"""

# %%
import tempfile

from cls_ssl.harness import format_table, resolve_settings, sweep

settings = resolve_settings({"iters": 1000})
variants = ["supervised_only", "fixmatch", "fixmatch_nl", "fixmatch_rw", "cls", "cls_no_nl",
            "cls_no_rw", "cls_no_cross"]

with tempfile.TemporaryDirectory() as out:
    table = sweep(settings, variants, runs=2, out_dir=out)
print(format_table(table))

# %%
# The same sweep from a shell:
#
#   cls-ssl sweep --variant cls,fixmatch --runs 5 --out runs/ablation
