"""
Inside the synthetic generator
==============================

The dataset is built in three layers: background clients sampled by a
two-colouring so the gateway sees every flow once, bot families sharing a
peer pool, and legitimate P2P apps drawing from a huge peer universe.
"""

# %%
from itertools import combinations

import numpy as np

from p2pbotnet.flow_model import format_ip, prefix16
from p2pbotnet.mcg import compute_mcr
from p2pbotnet.p2p_hosts import detect_p2p_hosts
from p2pbotnet.synth import GenConfig, generate_background_contacts, generate_dataset, two_color_sample

cfg = GenConfig(n_internal=200, seed=3)
rng = np.random.default_rng(cfg.seed)
uni = generate_background_contacts(cfg, rng)
print(len(uni.clients), "candidate clients,", len(uni.contacts) - len(uni.clients), "external servers")

# %% [markdown]
# Two-colouring: the start host is black, its contacts white, their
# contacts black again. Black hosts become the inside of the network.

# %%
sample = two_color_sample(uni.contacts, 200, rng, start=uni.clients[0])
inside = set(sample.internal)
print("black", len(sample.black), "white", len(sample.white))
print("any inside host talking to another?", any(set(uni.contacts[h]) & inside for h in inside))

# %% [markdown]
# Background hosts never reach 50 distinct /16 networks on one flow pattern,
# so stage 1 keeps only bots and P2P apps.

# %%
ds = generate_dataset(GenConfig(seed=3))
hosts = detect_p2p_hosts(ds.flows)
print(sorted({ds.truth.kind(ds.truth.labels[h]) for h in hosts}))

# %%
# mutual contact ratio inside a family versus between legit hosts
for fam in sorted(ds.truth.families):
    bots = sorted(h for h in ds.truth.bots if ds.truth.family(h) == fam)
    mcr = [compute_mcr(hosts[a].contacts, hosts[b].contacts) for a, b in combinations(bots, 2)]
    print(fam, "mean MCR", round(sum(mcr) / len(mcr), 3))
legit = sorted(ds.truth.hosts_of("p2p"))
print("legit max MCR", round(max(compute_mcr(hosts[a].contacts, hosts[b].contacts)
                                 for a, b in combinations(legit, 2)), 3))

# %%
h = legit[0]
print(format_ip(h), "talks to", len(hosts[h].contacts), "peers in",
      len({prefix16(c) for c in hosts[h].contacts}), "/16 networks")
