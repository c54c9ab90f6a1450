"""Stage 1: find P2P hosts by destination diversity of their flow clusters.

Flows are grouped on ``(src, proto, bpp_out, bpp_in)``. A cluster whose
destinations span at least ``theta_dd`` distinct /16 networks is treated as
P2P management traffic and its source as a P2P host. Grouping is written as
a map step (per shard) plus a merge so large inputs can be split across
worker processes.
"""
from __future__ import annotations

from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

from .flow_model import FlowKey, FlowRecord, HostId, Prefix16, Protocol, format_ip, prefix16

DEFAULT_THETA_DD = 50

Pattern = tuple[Protocol, int, int]


@dataclass
class FlowCluster:
    key: FlowKey
    dsts: set[HostId] = field(default_factory=set)

    @property
    def dd_prefixes(self) -> set[Prefix16]:
        return {prefix16(d) for d in self.dsts}

    @property
    def dd(self) -> int:
        return len(self.dd_prefixes)


@dataclass(frozen=True)
class P2PHostResult:
    host: HostId
    mnf_flows: frozenset[tuple[FlowKey, HostId]]
    contacts: frozenset[HostId]
    patterns: frozenset[Pattern]

    @classmethod
    def from_mnf_flows(cls, host: HostId, mnf_flows: Iterable[tuple[FlowKey, HostId]]):
        mnf = frozenset(mnf_flows)
        if not mnf:
            raise ValueError("a P2P host needs at least one MNF flow")
        return cls(host, mnf,
                   frozenset(dst for _, dst in mnf),
                   frozenset(key.pattern for key, _ in mnf))


def _check_theta_dd(theta_dd: int) -> int:
    if int(theta_dd) != theta_dd or theta_dd < 1:
        raise ValueError(f"theta_dd must be a positive integer, got {theta_dd!r}")
    return int(theta_dd)


def map_flows(flows: Iterable[FlowRecord]) -> dict[FlowKey, set[HostId]]:
    """Map step: FlowKey -> destinations seen in this shard."""
    groups: dict[FlowKey, set[HostId]] = defaultdict(set)
    for f in flows:
        groups[FlowKey(f.src, f.proto, f.bpp_out, f.bpp_in)].add(f.dst)
    return dict(groups)


def merge_clusters(partials: Iterable[Mapping[FlowKey, set[HostId]]]) -> dict[FlowKey, FlowCluster]:
    merged: dict[FlowKey, FlowCluster] = {}
    for part in partials:
        for key, dsts in part.items():
            cluster = merged.get(key)
            if cluster is None:
                merged[key] = FlowCluster(key, set(dsts))
            else:
                cluster.dsts |= dsts
    return merged


def shard(items: Sequence, n: int) -> list[Sequence]:
    n = max(1, min(n, len(items) or 1))
    size = -(-len(items) // n)
    return [items[i:i + size] for i in range(0, len(items), size)] or [items]


def cluster_flows(flows: Sequence[FlowRecord], workers: int = 1) -> dict[FlowKey, FlowCluster]:
    flows = list(flows)
    if workers <= 1 or len(flows) < 2:
        return merge_clusters([map_flows(flows)])
    with ProcessPoolExecutor(max_workers=workers) as pool:
        partials = list(pool.map(map_flows, shard(flows, workers)))
    return merge_clusters(partials)


def detect_p2p_flow_clusters(clusters: Mapping[FlowKey, FlowCluster], theta_dd: int = DEFAULT_THETA_DD) -> set[FlowKey]:
    theta_dd = _check_theta_dd(theta_dd)
    return {key for key, c in clusters.items() if c.dd >= theta_dd}


def hosts_from_clusters(clusters: Mapping[FlowKey, FlowCluster], theta_dd: int = DEFAULT_THETA_DD) -> dict[HostId, P2PHostResult]:
    """Collect MNF flows of the qualifying clusters, per source host."""
    mnf: dict[HostId, list[tuple[FlowKey, HostId]]] = defaultdict(list)
    for key in detect_p2p_flow_clusters(clusters, theta_dd):
        mnf[key.src].extend((key, d) for d in clusters[key].dsts)
    return {h: P2PHostResult.from_mnf_flows(h, mnf[h]) for h in sorted(mnf)}


def detect_p2p_hosts(flows: Sequence[FlowRecord], theta_dd: int = DEFAULT_THETA_DD,
                     workers: int = 1) -> dict[HostId, P2PHostResult]:
    """Hosts owning at least one P2P management-flow cluster.

    Only flows from qualifying clusters are kept for later stages; the host's
    other clusters are dropped.
    """
    return hosts_from_clusters(cluster_flows(flows, workers), theta_dd)


CLUSTER_STATS_HEADER = ("src", "proto", "bpp_out", "bpp_in", "destinations", "dd", "p2p")


def write_cluster_stats(clusters: Mapping[FlowKey, FlowCluster], fh: TextIO,
                        theta_dd: int = DEFAULT_THETA_DD) -> None:
    """Debug dump, one row per flow cluster, sorted by key."""
    theta_dd = _check_theta_dd(theta_dd)
    fh.write(",".join(CLUSTER_STATS_HEADER) + "\n")
    for key in sorted(clusters):
        c = clusters[key]
        dd = c.dd
        fh.write(f"{format_ip(key.src)},{key.proto.value},{key.bpp_out},{key.bpp_in},"
                 f"{len(c.dsts)},{dd},{int(dd >= theta_dd)}\n")
