"""Slow, obviously-correct reference computations used by the tests.

None of these call into the code under test beyond plain data types.
"""
from collections import defaultdict
from fractions import Fraction
from itertools import combinations


def sequential_groups(flows):
    groups = defaultdict(set)
    for f in flows:
        groups[(f.src, f.proto, f.bpp_out, f.bpp_in)].add(f.dst)
    return dict(groups)


def prefix_census(ips):
    return len({(ip >> 24, (ip >> 16) & 0xFF) for ip in ips})


def jaccard(a, b):
    a, b = set(a), set(b)
    return Fraction(len(a & b), len(a | b))


def naive_edges(hosts, theta_mcr):
    """hosts: {host: (contacts, patterns)} -> {(a, b): mcr} by an all-pairs loop."""
    edges = {}
    names = sorted(hosts)
    for i in range(len(names)):
        for j in range(len(names)):
            if i >= j:
                continue
            a, b = names[i], names[j]
            (ca, sa), (cb, sb) = hosts[a], hosts[b]
            if not set(sa) & set(sb):
                continue
            mcr = jaccard(ca, cb)
            if mcr > Fraction(theta_mcr):
                edges[(a, b)] = float(mcr)
    return edges


def modularity_double_sum(vertices, edges, community, resolution=1.0):
    """(1/2m) sum_ij [A_ij - g k_i k_j / 2m] delta(c_i, c_j), with a dense A."""
    idx = {v: i for i, v in enumerate(vertices)}
    n = len(vertices)
    A = [[0.0] * n for _ in range(n)]
    for (a, b), w in edges.items():
        A[idx[a]][idx[b]] = w
        A[idx[b]][idx[a]] = w
    k = [sum(row) for row in A]
    two_m = sum(k)
    total = 0.0
    for i in range(n):
        for j in range(n):
            if community[vertices[i]] == community[vertices[j]]:
                total += A[i][j] - resolution * k[i] * k[j] / two_m
    return total / two_m


def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def is_clique(nodes, adj):
    return all(b in adj[a] for a, b in combinations(nodes, 2))


def brute_max_cliques(adj):
    """Every maximum clique by checking all 2^n subsets."""
    nodes = sorted(adj)
    best, found = 0, []
    for mask in range(1, 1 << len(nodes)):
        sub = [nodes[i] for i in range(len(nodes)) if mask >> i & 1]
        if len(sub) < best or not is_clique(sub, adj):
            continue
        if len(sub) > best:
            best, found = len(sub), []
        found.append(tuple(sub))
    return sorted(found)
