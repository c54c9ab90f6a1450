"""Weighted modularity and the Louvain method on a mutual contact graph."""
from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Optional

from .flow_model import HostId, format_ip
from .mcg import Edge, MutualContactGraph

DEFAULT_RESOLUTION = 1.0
DEFAULT_SEED = 0
GAIN_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Community:
    id: int
    members: frozenset[HostId]
    internal_edges: dict[Edge, float]

    @property
    def size(self) -> int:
        return len(self.members)


class Partition:
    """Host -> community id, with ids dense in ``0..k-1``."""

    def __init__(self, assignment: Mapping[HostId, int]):
        self.assignment = dict(assignment)
        ids = set(self.assignment.values())
        if ids != set(range(len(ids))):
            raise ValueError("community ids must be contiguous from 0")

    @classmethod
    def from_groups(cls, groups) -> "Partition":
        """Build from an iterable of member collections, numbered by smallest member."""
        groups = sorted((sorted(g) for g in groups if g), key=lambda g: g[0])
        assignment = {}
        for cid, members in enumerate(groups):
            for h in members:
                if h in assignment:
                    raise ValueError(f"host {format_ip(h)} assigned twice")
                assignment[h] = cid
        return cls(assignment)

    @classmethod
    def from_labels(cls, labels: Mapping[HostId, object]) -> "Partition":
        groups = defaultdict(list)
        for h, lab in labels.items():
            groups[lab].append(h)
        return cls.from_groups(groups.values())

    @classmethod
    def singletons(cls, hosts) -> "Partition":
        return cls({h: i for i, h in enumerate(sorted(hosts))})

    def __getitem__(self, host: HostId) -> int:
        return self.assignment[host]

    def __len__(self):
        return len(set(self.assignment.values()))

    def __eq__(self, other):
        return isinstance(other, Partition) and self.assignment == other.assignment

    def __repr__(self):
        return f"Partition({len(self)} communities over {len(self.assignment)} hosts)"

    def groups(self) -> dict[int, list[HostId]]:
        out: dict[int, list[HostId]] = defaultdict(list)
        for h in sorted(self.assignment):
            out[self.assignment[h]].append(h)
        return dict(sorted(out.items()))

    def as_sets(self) -> set[frozenset[HostId]]:
        return {frozenset(m) for m in self.groups().values()}

    def check_covers(self, g: MutualContactGraph) -> None:
        if set(self.assignment) != set(g.ddr):
            raise ValueError("partition does not cover exactly the graph's vertices")

    def communities(self, g: MutualContactGraph) -> list[Community]:
        self.check_covers(g)
        internal: dict[int, dict[Edge, float]] = defaultdict(dict)
        for (a, b), w in g.edges.items():
            if self.assignment[a] == self.assignment[b]:
                internal[self.assignment[a]][(a, b)] = w
        return [Community(cid, frozenset(members), dict(sorted(internal[cid].items())))
                for cid, members in self.groups().items()]

    def write(self, fh) -> None:
        for h in sorted(self.assignment):
            fh.write(f"{format_ip(h)} {self.assignment[h]}\n")


def modularity(g: MutualContactGraph, p: Partition, resolution: float = DEFAULT_RESOLUTION) -> float:
    """Newman modularity with edge weights and a resolution factor."""
    p.check_covers(g)
    m = g.total_weight()
    if m == 0:
        if len(p) == len(g):
            return 0.0
        raise ValueError("modularity is degenerate on an edgeless graph unless all hosts are singletons")
    degree: dict[HostId, float] = defaultdict(float)
    internal: dict[int, float] = defaultdict(float)
    for (a, b), w in g.edges.items():
        degree[a] += w
        degree[b] += w
        if p[a] == p[b]:
            internal[p[a]] += w
    total: dict[int, float] = defaultdict(float)
    for v, k in degree.items():
        total[p[v]] += k
    return sum(internal[c] / m - resolution * (total[c] / (2 * m)) ** 2 for c in total)


class _Level:
    """Working graph for one Louvain level: integer nodes, optional self-loops."""

    def __init__(self, n: int, adj: list[dict[int, float]], loops: list[float]):
        self.n = n
        self.adj = adj
        self.loops = loops
        self.degree = [2 * loops[i] + sum(adj[i].values()) for i in range(n)]


def _local_moves(level: _Level, m: float, resolution: float, rng: random.Random) -> tuple[list[int], bool]:
    comm = list(range(level.n))
    tot = list(level.degree)
    order = list(range(level.n))
    moved_any = False
    while True:
        rng.shuffle(order)
        moved = False
        for i in order:
            ki = level.degree[i]
            if not level.adj[i]:
                continue
            links: dict[int, float] = defaultdict(float)
            for j, w in level.adj[i].items():
                links[comm[j]] += w
            own = comm[i]
            tot[own] -= ki
            scale = resolution * ki / (2 * m)
            best, best_gain = own, links.get(own, 0.0) - tot[own] * scale
            for c in sorted(links):
                if c == own:
                    continue
                gain = links[c] - tot[c] * scale
                if (gain - best_gain) / m > GAIN_TOLERANCE:
                    best, best_gain = c, gain
            tot[best] += ki
            if best != own:
                comm[i] = best
                moved = True
        if not moved:
            return comm, moved_any
        moved_any = True


def _aggregate(level: _Level, comm: list[int]) -> tuple[_Level, list[int]]:
    relabel: dict[int, int] = {}
    for c in comm:
        relabel.setdefault(c, len(relabel))
    dense = [relabel[c] for c in comm]
    k = len(relabel)
    adj: list[dict[int, float]] = [defaultdict(float) for _ in range(k)]
    loops = [0.0] * k
    for i in range(level.n):
        ci = dense[i]
        loops[ci] += level.loops[i]
        for j, w in level.adj[i].items():
            cj = dense[j]
            if ci == cj:
                if i < j:
                    loops[ci] += w
            else:
                adj[ci][cj] += w
    return _Level(k, [dict(a) for a in adj], loops), dense


def louvain(g: MutualContactGraph, resolution: float = DEFAULT_RESOLUTION, seed: int = DEFAULT_SEED,
            history: Optional[list[float]] = None) -> Partition:
    """Two-phase Louvain (local moving, then aggregation) until no move helps.

    Nodes are visited in an order shuffled by ``random.Random(seed)`` on every
    sweep; ties in gain go to the lowest community id. If ``history`` is given,
    the modularity of the starting singletons and of every completed pass is
    appended to it.
    """
    hosts = g.vertices
    if not hosts:
        raise ValueError("louvain needs at least one vertex")
    m = g.total_weight()
    current = Partition.singletons(hosts)
    if history is not None:
        history.append(modularity(g, current, resolution))
    if m == 0:
        return current

    index = {h: i for i, h in enumerate(hosts)}
    adj: list[dict[int, float]] = [{} for _ in hosts]
    for (a, b), w in g.edges.items():
        adj[index[a]][index[b]] = w
        adj[index[b]][index[a]] = w
    level = _Level(len(hosts), adj, [0.0] * len(hosts))
    membership = list(range(len(hosts)))  # original node -> level node
    rng = random.Random(seed)
    previous = modularity(g, current, resolution)

    while True:
        comm, moved = _local_moves(level, m, resolution, rng)
        if not moved:
            break
        level, dense = _aggregate(level, comm)
        membership = [dense[c] for c in membership]
        current = Partition.from_labels({h: membership[i] for i, h in enumerate(hosts)})
        q = modularity(g, current, resolution)
        assert q >= previous - 1e-12, "modularity decreased across a Louvain pass"
        previous = q
        if history is not None:
            history.append(q)
    return current
