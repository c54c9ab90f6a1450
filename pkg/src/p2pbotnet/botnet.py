"""Botnet community filtering and clique-based bot candidate extraction."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .community import Partition
from .flow_model import HostId
from .mcg import MutualContactGraph

DEFAULT_THETA_AVGDDR = 0.0625
DEFAULT_THETA_AVGMCR = 0.25
MIN_CLIQUE_SIZE = 3


@dataclass(frozen=True)
class CommunityFeatures:
    community_id: int
    avgddr: float
    avgmcr: float
    size: int


@dataclass(frozen=True)
class BotnetThresholds:
    theta_avgddr: float = DEFAULT_THETA_AVGDDR
    theta_avgmcr: float = DEFAULT_THETA_AVGMCR

    def __post_init__(self):
        for name in ("theta_avgddr", "theta_avgmcr"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass
class BotCandidateSet:
    bots: set[HostId] = field(default_factory=set)
    cliques: list[tuple[HostId, ...]] = field(default_factory=list)


def community_features(g: MutualContactGraph, p: Partition) -> list[CommunityFeatures]:
    """Mean DDR of members and mean MCR over all member pairs (missing edges count 0)."""
    feats = []
    for com in p.communities(g):
        n = com.size
        avgddr = sum(g.ddr[v] for v in com.members) / n
        avgmcr = 2 * sum(com.internal_edges.values()) / (n * (n - 1)) if n >= 2 else 0.0
        feats.append(CommunityFeatures(com.id, avgddr, avgmcr, n))
    return feats


def filter_botnet_communities(feats: Iterable[CommunityFeatures],
                              th: BotnetThresholds = BotnetThresholds()) -> set[int]:
    return {f.community_id for f in feats
            if f.avgddr >= th.theta_avgddr and f.avgmcr >= th.theta_avgmcr}


def _neighbors(g: MutualContactGraph) -> dict[HostId, set[HostId]]:
    nbrs: dict[HostId, set[HostId]] = {v: set() for v in g.ddr}
    for a, b in g.edges:
        nbrs[a].add(b)
        nbrs[b].add(a)
    return nbrs


def max_cliques(sub: MutualContactGraph | Mapping[HostId, set[HostId]]) -> list[tuple[HostId, ...]]:
    """Every clique of maximum cardinality, as sorted tuples in lexicographic order.

    Edge weights are ignored. Bron-Kerbosch with pivoting, pruned by the best
    size found so far.
    """
    nbrs = _neighbors(sub) if isinstance(sub, MutualContactGraph) else {v: set(n) for v, n in sub.items()}
    if not nbrs:
        raise ValueError("max_cliques needs at least one vertex")
    best_size = 1
    found: list[tuple[HostId, ...]] = []

    def expand(r: list[HostId], p: set[HostId], x: set[HostId]):
        nonlocal best_size, found
        if not p and not x:
            if len(r) > best_size:
                best_size, found = len(r), [tuple(sorted(r))]
            elif len(r) == best_size:
                found.append(tuple(sorted(r)))
            return
        if len(r) + len(p) < best_size:
            return
        pivot = max(p | x, key=lambda u: len(nbrs[u] & p))
        for v in sorted(p - nbrs[pivot]):
            expand(r + [v], p & nbrs[v], x & nbrs[v])
            p = p - {v}
            x = x | {v}

    expand([], set(nbrs), set())
    return sorted(set(found))


def _clique_rounds(sub: MutualContactGraph) -> list[tuple[HostId, ...]]:
    nbrs = _neighbors(sub)
    accepted: list[tuple[HostId, ...]] = []
    while nbrs:
        cliques = max_cliques(nbrs)
        if len(cliques[0]) < MIN_CLIQUE_SIZE:
            break
        taken: set[HostId] = set()
        for clique in cliques:
            # overlapping equal-size cliques: first one in lexicographic order wins
            if taken.isdisjoint(clique):
                accepted.append(clique)
                taken.update(clique)
        nbrs = {v: n - taken for v, n in nbrs.items() if v not in taken}
    return accepted


def detect_bot_candidates(g: MutualContactGraph, botnet_communities: Iterable[int],
                          p: Partition) -> BotCandidateSet:
    """Repeatedly peel maximum cliques (size >= 3) off each botnet community."""
    groups = p.groups()
    result = BotCandidateSet()
    for cid in sorted(set(botnet_communities)):
        if cid not in groups:
            raise ValueError(f"unknown community id {cid}")
        for clique in _clique_rounds(g.subgraph(groups[cid])):
            result.cliques.append(clique)
            result.bots.update(clique)
    return result
