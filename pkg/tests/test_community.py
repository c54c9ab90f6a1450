import random
from itertools import combinations

import pytest
from hypothesis import given, settings, strategies as st

from oracles import modularity_double_sum, set_partitions
from p2pbotnet.community import Partition, louvain, modularity
from p2pbotnet.mcg import MutualContactGraph


def graph(n, edges):
    return MutualContactGraph({v: 1.0 for v in range(n)}, {tuple(sorted(e)): w for e, w in edges.items()})


def random_graph(n, p, seed, weighted=True):
    rng = random.Random(seed)
    edges = {(a, b): (rng.uniform(0.05, 1.0) if weighted else 1.0)
             for a, b in combinations(range(n), 2) if rng.random() < p}
    return graph(n, edges)


def two_cliques():
    edges = {e: 1.0 for e in combinations(range(4), 2)}
    edges.update({e: 1.0 for e in combinations(range(4, 8), 2)})
    edges[(3, 4)] = 1.0
    return graph(8, edges)


def test_two_disjoint_edges():
    g = graph(4, {(0, 1): 1.0, (2, 3): 1.0})
    assert modularity(g, Partition.from_groups([[0, 1], [2, 3]])) == pytest.approx(0.5, abs=1e-12)


def test_single_community_is_zero():
    for seed in range(10):
        g = random_graph(9, 0.4, seed)
        if not g.edges:
            continue
        assert modularity(g, Partition({v: 0 for v in g.ddr})) == pytest.approx(0.0, abs=1e-12)


def test_random_graph_matches_double_sum():
    g = random_graph(8, 0.5, seed=42)
    rng = random.Random(1)
    p = Partition.from_labels({v: rng.randrange(3) for v in g.ddr})
    expected = modularity_double_sum(g.vertices, g.edges, p.assignment)
    assert modularity(g, p) == pytest.approx(expected, abs=1e-12)


def test_resolution_matches_double_sum():
    g = random_graph(7, 0.6, seed=3)
    p = Partition.from_labels({v: v % 2 for v in g.ddr})
    for gamma in (0.5, 1.0, 2.0):
        expected = modularity_double_sum(g.vertices, g.edges, p.assignment, gamma)
        assert modularity(g, p, gamma) == pytest.approx(expected, abs=1e-12)


def test_edgeless_graph():
    g = graph(3, {})
    assert modularity(g, Partition.singletons(range(3))) == 0.0
    with pytest.raises(ValueError):
        modularity(g, Partition({0: 0, 1: 0, 2: 1}))


def test_partition_must_cover_graph():
    with pytest.raises(ValueError):
        modularity(graph(3, {(0, 1): 1.0}), Partition({0: 0, 1: 0}))


def test_partition_ids_contiguous():
    with pytest.raises(ValueError):
        Partition({1: 0, 2: 2})


def test_louvain_two_cliques_is_brute_force_optimum():
    g = two_cliques()
    parts = list(set_partitions(range(8)))
    assert len(parts) == 4140
    best = max(parts, key=lambda pt: modularity(g, Partition.from_groups(pt)))
    p = louvain(g)
    assert p == Partition.from_groups(best)
    assert p.as_sets() == {frozenset(range(4)), frozenset(range(4, 8))}
    assert modularity(g, p) == pytest.approx(11 / 26, abs=1e-12)


def test_edgeless_graph_gives_singletons():
    p = louvain(graph(5, {}))
    assert len(p) == 5


def test_single_vertex():
    p = louvain(graph(1, {}))
    assert p.assignment == {0: 0}


def test_empty_graph_rejected():
    with pytest.raises(ValueError):
        louvain(MutualContactGraph())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 25), st.floats(0.05, 0.6), st.integers(0, 5))
def test_louvain_properties(gseed, n, p, seed):
    g = random_graph(n, p, gseed)
    history = []
    part = louvain(g, seed=seed, history=history)
    assert set(part.assignment) == set(g.ddr)
    assert sorted(set(part.assignment.values())) == list(range(len(part)))
    assert all(b >= a - 1e-12 for a, b in zip(history, history[1:]))
    if g.edges:
        assert modularity(g, part) >= modularity(g, Partition.singletons(g.ddr)) - 1e-12
        assert modularity(g, part) == pytest.approx(history[-1], abs=1e-12)
    assert louvain(g, seed=seed) == part


def test_isolated_vertices_stay_alone():
    g = graph(6, {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 1.0})
    p = louvain(g)
    for v in (3, 4, 5):
        assert p.groups()[p[v]] == [v]


def test_no_community_spans_components():
    rng = random.Random(0)
    edges = {}
    for offset in (0, 10, 20):
        for a, b in combinations(range(offset, offset + 10), 2):
            if rng.random() < 0.5:
                edges[(a, b)] = rng.uniform(0.1, 1)
    g = graph(30, edges)
    for seed in range(5):
        for members in louvain(g, seed=seed).groups().values():
            assert len({m // 10 for m in members}) == 1


def test_weight_scaling_preserves_partition_ordering():
    for seed in range(5):
        g = random_graph(6, 0.6, seed)
        if not g.edges:
            continue
        scaled = MutualContactGraph(g.ddr, {e: 3.7 * w for e, w in g.edges.items()})
        parts = [Partition.from_groups(pt) for pt in set_partitions(range(6))]
        q = [modularity(g, pt) for pt in parts]
        qs = [modularity(scaled, pt) for pt in parts]
        assert q == pytest.approx(qs, abs=1e-12)
        assert louvain(g) == louvain(scaled)
