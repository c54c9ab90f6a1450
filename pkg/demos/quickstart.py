"""
Quickstart
==========

Generate the default labelled dataset, run detection, score it.
"""

# %%
from p2pbotnet import compute_metrics, generate_dataset, run_pipeline
from p2pbotnet.flow_model import format_ip

ds = generate_dataset()
print(len(ds.flows), "flows from", len(ds.truth.labels), "internal hosts")

# %% [markdown]
# Every stage only removes hosts. The counts below are the survivors of
# P2P detection, community detection, the botnet filter and clique search.

# %%
report = run_pipeline(ds.flows)
for stage, n in report.stage_counts.items():
    print(f"{stage:>24} {n}")

# %%
report.metrics = compute_metrics(report, ds.truth)
for k in ("detection_rate", "false_positives", "flcr", "fbcr", "fbsr"):
    print(k, report.metrics[k])

# %%
# which family each accepted clique belongs to
for clique in report.cliques:
    fams = {ds.truth.family(h) for h in clique}
    print(sorted(fams), [format_ip(h) for h in clique])
