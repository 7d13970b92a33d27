"""Topic detection on the co-occurrence graph and per-topic k-core decomposition."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import kernels
from .semantic_graph import CooccurrenceGraph

UNASSIGNED = -1


class IntegrationError(ValueError):
    """External detector output does not match the graph."""


@dataclass
class TopicPartition:
    """Hashtag-to-topic map over the nodes of one graph.

    ``assignment[node]`` is a topic id in ``0..n_topics-1`` or ``UNASSIGNED``.
    """

    tags: list[str]
    assignment: np.ndarray
    provenance: str

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int64)
        self._index = {t: i for i, t in enumerate(self.tags)}

    @property
    def n_topics(self) -> int:
        return int(self.assignment.max()) + 1 if (self.assignment >= 0).any() else 0

    def members(self, topic: int) -> list[int]:
        return np.flatnonzero(self.assignment == topic).tolist()

    def member_tags(self, topic: int) -> list[str]:
        return [self.tags[i] for i in self.members(topic)]

    def topic_of(self, tag: str) -> int:
        i = self._index.get(tag)
        return UNASSIGNED if i is None else int(self.assignment[i])

    def check_topic(self, topic: int) -> None:
        if not 0 <= topic < self.n_topics:
            raise KeyError(f"unknown topic {topic} (have {self.n_topics})")

    def lookup(self, hashtags) -> np.ndarray:
        """Topic id for each entry of an interned hashtag table (``UNASSIGNED`` if absent)."""
        out = np.full(len(hashtags), UNASSIGNED, dtype=np.int64)
        for i, tag in enumerate(hashtags):
            j = self._index.get(tag)
            if j is not None:
                out[i] = self.assignment[j]
        return out

    def write(self, path: str | Path) -> None:
        """Community file: one ``topic_id tag tag ...`` line per topic."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# provenance: {self.provenance}\n")
            for t in range(self.n_topics):
                fh.write(" ".join([str(t)] + self.member_tags(t)) + "\n")

    @classmethod
    def read(cls, path: str | Path, graph: CooccurrenceGraph) -> TopicPartition:
        provenance = "file"
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
        if first.startswith("# provenance:"):
            provenance = first.split(":", 1)[1].strip()
        communities = read_communities(path, graph)
        return from_communities(graph, communities, provenance)


def read_communities(path: str | Path, graph: CooccurrenceGraph) -> list[list[int]]:
    """Parse a community file into lists of node indices.

    Two layouts are accepted: ``topic_id tag tag ...`` lines, and the
    ``#module`` header / id-line layout where ids refer to the 1-based
    interchange edge list written by ``CooccurrenceGraph.write``.
    """
    communities: list[list[int]] = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    module_mode = any(line.startswith("#module") for line in lines)
    for line in lines:
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        tokens = text.split()
        nodes: list[int] = []
        if module_mode:
            for tok in tokens:
                try:
                    i = int(tok) - 1
                except ValueError:
                    raise IntegrationError(f"non-integer node id {tok!r}") from None
                if not 0 <= i < graph.n_nodes:
                    raise IntegrationError(f"node id {tok} not in graph")
                nodes.append(i)
        else:
            for tok in tokens[1:]:
                if tok not in graph:
                    raise IntegrationError(f"hashtag {tok!r} not in graph")
                nodes.append(graph.node(tok))
        communities.append(nodes)
    return communities


def from_communities(graph: CooccurrenceGraph, communities: list[list[int]],
                     provenance: str) -> TopicPartition:
    """Reduce possibly overlapping communities to a partition.

    A node in several communities goes to the one where its summed edge
    weight to the other members is largest (ties: lowest community index).
    Communities left with fewer than two members are dropped and their
    nodes become unassigned. Surviving topics keep their relative order.
    """
    n = graph.n_nodes
    adj = graph.adjacency()
    home = np.full(n, UNASSIGNED, dtype=np.int64)
    best = np.full(n, -np.inf)
    sets = [np.unique(np.asarray(c, dtype=np.int64)) for c in communities]
    for cid, nodes in enumerate(sets):
        if len(nodes) == 0:
            continue
        inside = np.zeros(n, dtype=bool)
        inside[nodes] = True
        strength = np.asarray(adj[nodes][:, inside].sum(axis=1)).ravel()
        better = strength > best[nodes]
        home[nodes[better]] = cid
        best[nodes[better]] = strength[better]
    return _relabel(home, graph.tags, provenance)


def _relabel(raw: np.ndarray, tags: list[str], provenance: str) -> TopicPartition:
    assigned = raw >= 0
    labels, counts = np.unique(raw[assigned], return_counts=True)
    keep = labels[counts >= 2]
    remap = {int(c): i for i, c in enumerate(keep)}
    out = np.array([remap.get(int(c), UNASSIGNED) for c in raw], dtype=np.int64)
    return TopicPartition(list(tags), out, provenance)


def modularity(adj: sp.csr_matrix, labels: np.ndarray, resolution: float = 1.0) -> float:
    """Weighted Newman modularity of a labelling (each label is one community)."""
    k = np.asarray(adj.sum(axis=1)).ravel()
    m2 = k.sum()
    if m2 == 0:
        return 0.0
    labels = np.asarray(labels)
    coo = adj.tocoo()
    internal = coo.data[labels[coo.row] == labels[coo.col]].sum()
    _, inv = np.unique(labels, return_inverse=True)
    tot = np.bincount(inv, weights=k)
    return float(internal / m2 - resolution * (tot ** 2).sum() / m2 ** 2)


def louvain(adj: sp.csr_matrix, seed: int = 0, resolution: float = 1.0) -> np.ndarray:
    """Greedy weighted-modularity maximization (local moving + aggregation).

    Node visit order at each level is a permutation drawn from ``seed``, so
    results are reproducible bit for bit.
    """
    n = adj.shape[0]
    membership = np.arange(n, dtype=np.int64)
    if n == 0 or adj.nnz == 0:
        return membership
    rng = np.random.default_rng(seed)
    level = adj.tocsr().astype(np.float64)
    while True:
        level.sort_indices()
        size = level.shape[0]
        strength = np.asarray(level.sum(axis=1)).ravel()
        m2 = float(strength.sum())
        community = np.arange(size, dtype=np.int64)
        order = rng.permutation(size).astype(np.int64)
        moves = kernels.local_moving(
            level.indptr.astype(np.int64), level.indices.astype(np.int32),
            level.data.astype(np.float64), strength, order, community,
            m2, float(resolution), 1e-12 * m2,
        )
        if moves == 0:
            break
        _, first = np.unique(community, return_index=True)
        order_of = np.empty(size, dtype=np.int64)
        ranked = community[np.sort(first)]
        order_of[ranked] = np.arange(len(ranked))
        community = order_of[community]
        membership = community[membership]
        n_comm = len(ranked)
        if n_comm == size:
            break
        s = sp.csr_matrix((np.ones(size), (np.arange(size), community)), shape=(size, n_comm))
        level = (s.T @ level @ s).tocsr()
    return membership


def detect_topics(graph: CooccurrenceGraph, detector: str = "default", seed: int = 0,
                  resolution: float = 1.0, communities_path: str | Path | None = None) -> TopicPartition:
    """Partition the graph into topics.

    ``default`` runs seeded Louvain; ``external`` reads a community file
    produced by another tool from the interchange edge list.
    """
    if graph.n_nodes == 0:
        raise ValueError("graph is empty")
    if detector == "default":
        labels = louvain(graph.adjacency(), seed=seed, resolution=resolution)
        labels = _canonical_order(labels)
        return _relabel(labels, graph.tags, f"louvain(seed={seed},resolution={resolution})")
    if detector == "external":
        if communities_path is None:
            raise ValueError("external detector needs a community file")
        communities = read_communities(communities_path, graph)
        return from_communities(graph, communities, f"external({Path(communities_path).name})")
    raise ValueError(f"unknown detector {detector!r}")


def _canonical_order(labels: np.ndarray) -> np.ndarray:
    """Renumber communities by decreasing size, then by lowest member index."""
    uniq, first, counts = np.unique(labels, return_index=True, return_counts=True)
    rank = np.lexsort((first, -counts))
    remap = np.empty(uniq.max() + 1, dtype=np.int64)
    remap[uniq[rank]] = np.arange(len(uniq))
    return remap[labels]


@dataclass
class CorenessMap:
    topic: int
    tags: list[str]
    degree: np.ndarray
    coreness: np.ndarray

    def rows(self):
        for t, d, c in zip(self.tags, self.degree.tolist(), self.coreness.tolist()):
            yield t, d, c

    def write(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tag", "topic", "degree", "coreness"])
            for t, d, c in self.rows():
                w.writerow([t, self.topic, d, c])


def core_numbers(adj: sp.csr_matrix) -> np.ndarray:
    """Coreness of every node of an undirected graph (weights ignored)."""
    a = adj.tocsr().copy()
    a.setdiag(0)
    a.eliminate_zeros()
    a.sort_indices()
    return kernels.core_numbers(a.indptr.astype(np.int64), a.indices.astype(np.int32))


def coreness(graph: CooccurrenceGraph, partition: TopicPartition, topic: int) -> CorenessMap:
    """Unweighted k-core decomposition of one topic's induced subgraph."""
    partition.check_topic(topic)
    nodes = partition.members(topic)
    sub = graph.subgraph(nodes)
    adj = sub.adjacency(weighted=False)
    return CorenessMap(topic, sub.tags, np.diff(adj.indptr).astype(np.int64),
                       core_numbers(adj).astype(np.int64))


def write_layout(graph: CooccurrenceGraph, partition: TopicPartition, path: str | Path) -> None:
    """Plot-ready table (tag, topic, coreness, degree) for every assigned hashtag."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tag", "topic", "coreness", "degree"])
        for t in range(partition.n_topics):
            cm = coreness(graph, partition, t)
            for tag, d, c in cm.rows():
                w.writerow([tag, t, c, d])


def partition_summary(partition: TopicPartition) -> dict:
    sizes = np.bincount(partition.assignment[partition.assignment >= 0], minlength=partition.n_topics)
    return {
        "provenance": partition.provenance,
        "n_topics": partition.n_topics,
        "n_assigned": int((partition.assignment >= 0).sum()),
        "n_unassigned": int((partition.assignment < 0).sum()),
        "sizes": sizes.tolist(),
    }


def write_summary(partition: TopicPartition, path: str | Path) -> None:
    Path(path).write_text(json.dumps(partition_summary(partition), indent=2) + "\n", encoding="utf-8")
