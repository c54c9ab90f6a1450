"""Mutual contact graph over detected P2P hosts.

Vertices carry the destination diversity ratio of the host's MNF contacts.
Two hosts are joined when they share at least one flow pattern and the
Jaccard index of their contact sets is strictly above ``theta_mcr``.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Collection, Iterable, Iterator, Mapping, TextIO

from .flow_model import HostId, format_ip, prefix16
from .p2p_hosts import P2PHostResult

DEFAULT_THETA_MCR = 0.03125

Edge = tuple[HostId, HostId]


def edge_key(a: HostId, b: HostId) -> Edge:
    if a == b:
        raise ValueError("self-loops are not allowed")
    return (a, b) if a < b else (b, a)


def compute_ddr(contacts: Collection[HostId]) -> float:
    """Distinct /16 prefixes over distinct contacts."""
    contacts = set(contacts)
    if not contacts:
        raise ValueError("destination diversity ratio undefined for an empty contact set")
    return len({prefix16(c) for c in contacts}) / len(contacts)


def compute_mcr(ci: Collection[HostId], cj: Collection[HostId]) -> float:
    """Mutual contact ratio: |ci & cj| / |ci | cj|."""
    ci, cj = set(ci), set(cj)
    union = len(ci | cj)
    if union == 0:
        raise ValueError("mutual contact ratio undefined for two empty contact sets")
    return len(ci & cj) / union


def _check_theta_mcr(theta_mcr: float) -> float:
    if not 0.0 <= theta_mcr <= 1.0:
        raise ValueError(f"theta_mcr must lie in [0, 1], got {theta_mcr!r}")
    return float(theta_mcr)


@dataclass
class MutualContactGraph:
    ddr: dict[HostId, float] = field(default_factory=dict)
    edges: dict[Edge, float] = field(default_factory=dict)

    @property
    def vertices(self) -> list[HostId]:
        return sorted(self.ddr)

    def __len__(self):
        return len(self.ddr)

    def weight(self, a: HostId, b: HostId) -> float:
        """Edge weight, 0.0 when absent."""
        if a == b:
            return 0.0
        return self.edges.get(edge_key(a, b), 0.0)

    def has_edge(self, a: HostId, b: HostId) -> bool:
        return a != b and edge_key(a, b) in self.edges

    def adjacency(self) -> dict[HostId, dict[HostId, float]]:
        adj: dict[HostId, dict[HostId, float]] = {v: {} for v in self.vertices}
        for (a, b), w in sorted(self.edges.items()):
            adj[a][b] = w
            adj[b][a] = w
        return adj

    def subgraph(self, members: Iterable[HostId]) -> "MutualContactGraph":
        members = set(members)
        return MutualContactGraph(
            {v: self.ddr[v] for v in sorted(members)},
            {e: w for e, w in self.edges.items() if e[0] in members and e[1] in members},
        )

    def total_weight(self) -> float:
        return sum(self.edges.values())

    def write_edges(self, fh: TextIO) -> None:
        for (a, b), w in sorted(self.edges.items()):
            fh.write(f"{format_ip(a)} {format_ip(b)} {w!r}\n")

    def write_vertices(self, fh: TextIO) -> None:
        for v in self.vertices:
            fh.write(f"{format_ip(v)} {self.ddr[v]!r}\n")


def _pair_edges(args) -> list[tuple[Edge, float]]:
    rows, hosts, theta_mcr = args
    out = []
    for i in rows:
        hi, ci, si = hosts[i]
        for j in range(i + 1, len(hosts)):
            hj, cj, sj = hosts[j]
            if si.isdisjoint(sj):
                continue
            inter = len(ci & cj)
            if inter == 0:
                continue
            mcr = inter / (len(ci) + len(cj) - inter)
            if mcr > theta_mcr:
                out.append(((hi, hj), mcr))
    return out


def _row_chunks(n: int, workers: int) -> Iterator[list[int]]:
    # interleave rows so each worker gets a similar share of the triangle
    for k in range(workers):
        yield list(range(k, n, workers))


def extract_mcg(hosts: Mapping[HostId, P2PHostResult], theta_mcr: float = DEFAULT_THETA_MCR,
                workers: int = 1) -> MutualContactGraph:
    theta_mcr = _check_theta_mcr(theta_mcr)
    order = sorted(hosts)
    table = [(h, hosts[h].contacts, hosts[h].patterns) for h in order]
    ddr = {h: compute_ddr(hosts[h].contacts) for h in order}

    if workers <= 1 or len(order) < 64:
        pairs = _pair_edges((range(len(order)), table, theta_mcr))
    else:
        jobs = [(rows, table, theta_mcr) for rows in _row_chunks(len(order), workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pairs = [p for part in pool.map(_pair_edges, jobs) for p in part]
    return MutualContactGraph(ddr, dict(sorted(pairs)))

