"""Graph construction helpers and brute-force oracles shared by tests."""

from __future__ import annotations

import random

import numpy as np

from opinionscape.semantic_graph import CooccurrenceGraph


def make_graph(n: int, edges, weights=None, prefix: str = "h") -> CooccurrenceGraph:
    edges = [tuple(sorted(e)) for e in edges]
    w = [1] * len(edges) if weights is None else list(weights)
    src = np.array([a for a, _ in edges], dtype=np.int64)
    dst = np.array([b for _, b in edges], dtype=np.int64)
    return CooccurrenceGraph([f"{prefix}{i}" for i in range(n)], src, dst, np.array(w, dtype=np.int64),
                             np.ones(n, dtype=np.int64))


def random_edges(rng: random.Random, n: int, p: float) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]


def brute_coreness(n: int, edges) -> list[int]:
    """Largest k such that the node survives repeated deletion of nodes of degree < k."""
    adj = {i: set() for i in range(n)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    core = [0] * n
    k = 1
    while True:
        alive = set(range(n))
        changed = True
        while changed:
            changed = False
            for v in list(alive):
                if len(adj[v] & alive) < k:
                    alive.discard(v)
                    changed = True
        if not alive:
            return core
        for v in alive:
            core[v] = k
        k += 1


def set_partitions(n: int):
    """All partitions of ``range(n)`` as restricted-growth label lists."""
    labels = [0] * n

    def rec(i: int, m: int):
        if i == n:
            yield list(labels)
            return
        for c in range(m + 1):
            labels[i] = c
            yield from rec(i + 1, max(m, c + 1))

    yield from rec(0, 0)


def modularity_py(n: int, edges, weights, labels) -> float:
    m = float(sum(weights))
    deg = [0.0] * n
    for (a, b), w in zip(edges, weights):
        deg[a] += w
        deg[b] += w
    inside: dict[int, float] = {}
    tot: dict[int, float] = {}
    for (a, b), w in zip(edges, weights):
        if labels[a] == labels[b]:
            inside[labels[a]] = inside.get(labels[a], 0.0) + w
    for v in range(n):
        tot[labels[v]] = tot.get(labels[v], 0.0) + deg[v]
    return sum(inside.get(c, 0.0) / m - (tot[c] / (2 * m)) ** 2 for c in tot)


def planted_graph(rng: np.random.Generator, sizes, p_in: float, p_out: float, w_in: int, w_out: int):
    """Weighted planted-partition graph; returns (graph, truth labels)."""
    truth = np.repeat(np.arange(len(sizes)), sizes)
    n = len(truth)
    edges, weights = [], []
    for i in range(n):
        for j in range(i + 1, n):
            same = truth[i] == truth[j]
            if rng.random() < (p_in if same else p_out):
                edges.append((i, j))
                weights.append(w_in if same else w_out)
    return make_graph(n, edges, weights), truth
