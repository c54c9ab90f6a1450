"""
Threshold sweeps
================

How detection moves as each of the four thresholds is varied on the
default dataset.
"""

# %%
import io

from p2pbotnet import generate_dataset
from p2pbotnet.pipeline import sweep, write_sweep_csv

ds = generate_dataset()

# %% [markdown]
# Raising the destination diversity threshold past the widest bot
# cluster removes every bot at stage 1.

# %%
rows = sweep(ds.flows, ds.truth, "theta_dd", [25, 50, 100, 125, 150])
for r in rows:
    print(r["value"], r["p2p_hosts"], r["detection_rate"])

# %% [markdown]
# A stricter edge threshold thins out the graph and botnets fall apart
# into more communities. FBSR counts the extra pieces per family.

# %%
rows = sweep(ds.flows, ds.truth, "theta_mcr", [0.03125, 0.25, 0.5, 0.75, 1.0])
for r in rows:
    print(r["value"], "FBSR", r["fbsr"], "FLCR", r["flcr"], "FBCR", r["fbcr"])

# %%
out = io.StringIO()
write_sweep_csv(sweep(ds.flows, ds.truth, "theta_avgmcr", [0.1, 0.25, 0.5, 0.75]), out)
print(out.getvalue())
