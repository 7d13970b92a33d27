"""Hashtag co-occurrence network and the political/apolitical hashtag classifier."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import kernels
from .affiliation import AffiliationResult
from .ingest import RecordStore

DEFAULT_MIN_WEIGHT = 5
DEFAULT_KL_THRESHOLD = 0.5


@dataclass
class CooccurrenceGraph:
    """Undirected weighted hashtag graph.

    Nodes are local indices ``0..n-1`` with labels ``tags``; edge arrays hold
    ``src < dst``. ``weight`` counts distinct users who used both tags in one
    tweet; ``node_users`` counts distinct users of each tag.
    """

    tags: list[str]
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    node_users: np.ndarray

    def __post_init__(self):
        self._index = {t: i for i, t in enumerate(self.tags)}

    @property
    def n_nodes(self) -> int:
        return len(self.tags)

    @property
    def n_edges(self) -> int:
        return len(self.weight)

    def node(self, tag: str) -> int:
        return self._index[tag]

    def __contains__(self, tag: str) -> bool:
        return tag in self._index

    def edge_weight(self, a: str, b: str) -> int:
        i, j = sorted((self._index[a], self._index[b]))
        hit = np.flatnonzero((self.src == i) & (self.dst == j))
        return int(self.weight[hit[0]]) if len(hit) else 0

    def adjacency(self, weighted: bool = True) -> sp.csr_matrix:
        n = self.n_nodes
        data = self.weight.astype(np.float64) if weighted else np.ones(self.n_edges)
        a = sp.coo_matrix(
            (np.concatenate([data, data]),
             (np.concatenate([self.src, self.dst]), np.concatenate([self.dst, self.src]))),
            shape=(n, n),
        ).tocsr()
        a.sort_indices()
        return a

    def degree(self) -> np.ndarray:
        return np.bincount(np.concatenate([self.src, self.dst]), minlength=self.n_nodes)

    def subgraph(self, nodes) -> CooccurrenceGraph:
        """Induced subgraph; isolated nodes are kept."""
        nodes = np.asarray(sorted(nodes), dtype=np.int64)
        remap = np.full(self.n_nodes, -1, dtype=np.int64)
        remap[nodes] = np.arange(len(nodes))
        keep = (remap[self.src] >= 0) & (remap[self.dst] >= 0)
        return CooccurrenceGraph([self.tags[i] for i in nodes], remap[self.src[keep]],
                                 remap[self.dst[keep]], self.weight[keep], self.node_users[nodes])

    def restrict(self, tags) -> CooccurrenceGraph:
        """Induced subgraph on ``tags`` with isolated nodes dropped."""
        wanted = {self._index[t] for t in tags if t in self._index}
        sub = self.subgraph(wanted)
        return _drop_isolated(sub)

    def to_networkx(self):
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(self.tags)
        g.add_weighted_edges_from(
            (self.tags[a], self.tags[b], int(w)) for a, b, w in zip(self.src, self.dst, self.weight)
        )
        return g

    def write(self, directory: str | Path) -> None:
        """Write ``edges.csv``, ``nodes.csv`` and the integer interchange edge list."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "edges.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tag_a", "tag_b", "weight"])
            for a, b, wt in zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist()):
                w.writerow([self.tags[a], self.tags[b], wt])
        with open(d / "nodes.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tag", "unique_user_count"])
            for t, c in zip(self.tags, self.node_users.tolist()):
                w.writerow([t, c])
        write_interchange(self, d / "interchange.edges", d / "interchange.nodes")

    @classmethod
    def read(cls, directory: str | Path) -> CooccurrenceGraph:
        d = Path(directory)
        tags, users = [], []
        with open(d / "nodes.csv", newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                tags.append(row["tag"])
                users.append(int(row["unique_user_count"]))
        index = {t: i for i, t in enumerate(tags)}
        src, dst, wt = [], [], []
        with open(d / "edges.csv", newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                a, b = index[row["tag_a"]], index[row["tag_b"]]
                src.append(min(a, b))
                dst.append(max(a, b))
                wt.append(int(row["weight"]))
        return cls(tags, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64),
                   np.array(wt, dtype=np.int64), np.array(users, dtype=np.int64))


def write_interchange(graph: CooccurrenceGraph, edges_path, nodes_path) -> None:
    """Whitespace edge list ``i j weight`` (1-based ids) plus the ``id tag`` map.

    This is the input format of common command-line community detectors.
    """
    with open(edges_path, "w", encoding="utf-8") as fh:
        for a, b, w in zip(graph.src.tolist(), graph.dst.tolist(), graph.weight.tolist()):
            fh.write(f"{a + 1} {b + 1} {w}\n")
    with open(nodes_path, "w", encoding="utf-8") as fh:
        for i, t in enumerate(graph.tags):
            fh.write(f"{i + 1} {t}\n")


def _drop_isolated(g: CooccurrenceGraph) -> CooccurrenceGraph:
    used = np.zeros(g.n_nodes, dtype=bool)
    used[g.src] = True
    used[g.dst] = True
    if used.all():
        return g
    return g.subgraph(np.flatnonzero(used))


def pair_user_counts(records: RecordStore) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distinct-user counts for every co-occurring tag pair (global tag ids, a < b)."""
    a, b, u = kernels.expand_pairs(records.tag_ptr, records.tag_idx, records.user)
    if len(a) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    key = a.astype(np.int64) * records.n_hashtags + b
    order = np.lexsort((u, key))
    key = key[order]
    u = u[order]
    first = np.ones(len(key), dtype=bool)
    first[1:] = (key[1:] != key[:-1]) | (u[1:] != u[:-1])
    key = key[first]
    uniq, counts = np.unique(key, return_counts=True)
    return uniq // records.n_hashtags, uniq % records.n_hashtags, counts.astype(np.int64)


def tag_user_counts(records: RecordStore) -> np.ndarray:
    """Distinct users per global tag id."""
    if len(records.tag_idx) == 0:
        return np.zeros(records.n_hashtags, dtype=np.int64)
    owners = records.user[records.tag_owner_rows()].astype(np.int64)
    key = np.unique(records.tag_idx.astype(np.int64) * records.n_users + owners)
    return np.bincount(key // records.n_users, minlength=records.n_hashtags).astype(np.int64)


def build_graph(records: RecordStore, min_weight: int = DEFAULT_MIN_WEIGHT) -> CooccurrenceGraph:
    """Co-occurrence graph over single tweets, pruned below ``min_weight`` users.

    Nodes left without edges after pruning are removed. Node order follows
    first appearance in the stream.
    """
    if min_weight < 1:
        raise ValueError("min_weight must be >= 1")
    a, b, w = pair_user_counts(records)
    keep = w >= min_weight
    a, b, w = a[keep], b[keep], w[keep]
    nodes = np.unique(np.concatenate([a, b]))
    remap = np.full(records.n_hashtags, -1, dtype=np.int64)
    remap[nodes] = np.arange(len(nodes))
    users = tag_user_counts(records)[nodes] if len(nodes) else np.zeros(0, dtype=np.int64)
    return CooccurrenceGraph(
        [records.interns.hashtags[int(i)] for i in nodes],
        remap[a], remap[b], w, users,
    )


@dataclass
class PoliticalScore:
    """Per-hashtag relative entropy (bits) of party usage against party sizes."""

    tags: list[str]
    dkl: np.ndarray
    shares: np.ndarray
    users: np.ndarray
    party_ids: list[str]
    party_sizes: np.ndarray
    threshold: float

    @property
    def is_political(self) -> np.ndarray:
        return self.dkl >= self.threshold

    def political_tags(self) -> list[str]:
        return [t for t, f in zip(self.tags, self.is_political) if f]

    def write(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tag", "dkl_bits"] + [f"share_{p}" for p in self.party_ids] + ["is_political"])
            for i, tag in enumerate(self.tags):
                w.writerow([tag, repr(float(self.dkl[i]))]
                           + [repr(float(s)) for s in self.shares[i]]
                           + [int(self.is_political[i])])

    @classmethod
    def read(cls, path: str | Path, threshold: float = DEFAULT_KL_THRESHOLD) -> PoliticalScore:
        tags, dkl, shares = [], [], []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            pids = [c[6:] for c in reader.fieldnames or [] if c.startswith("share_")]
            for row in reader:
                tags.append(row["tag"])
                dkl.append(float(row["dkl_bits"]))
                shares.append([float(row[f"share_{p}"]) for p in pids])
        return cls(tags, np.array(dkl), np.array(shares).reshape(len(tags), len(pids)),
                   np.zeros((len(tags), len(pids)), dtype=np.int64), pids,
                   np.zeros(len(pids), dtype=np.int64), threshold)


def relative_entropy_bits(counts, sizes) -> float:
    """KL divergence in bits of the normalized ``counts`` from normalized ``sizes``.

    Ratios are formed from integers so identical distributions give exactly 0.
    Zero-count terms contribute 0.
    """
    n = int(sum(counts))
    total = int(sum(sizes))
    acc = 0.0
    for c, s in zip(counts, sizes):
        c, s = int(c), int(s)
        if c == 0:
            continue
        if s == 0:
            raise ValueError("usage recorded for a party of size zero")
        acc += (c / n) * math.log2((c * total) / (n * s))
    return max(acc, 0.0)


def political_scores(records: RecordStore, affiliations: AffiliationResult,
                     kl_threshold: float = DEFAULT_KL_THRESHOLD) -> PoliticalScore:
    """Score every hashtag used by at least one affiliated user.

    Party sizes and per-hashtag usage both count distinct affiliated users.
    """
    if kl_threshold < 0:
        raise ValueError("kl_threshold must be >= 0")
    pids = list(affiliations.party_ids)
    sizes_map = affiliations.sizes()
    sizes = np.array([sizes_map.get(p, 0) for p in pids], dtype=np.int64)
    if (sizes > 0).sum() < 2:
        raise ValueError("need at least two parties with affiliated users")

    party_of_user = np.full(records.n_users, -1, dtype=np.int64)
    for name, p in affiliations.affiliated().items():
        idx = records.interns.users.get(name)
        if idx >= 0:
            party_of_user[idx] = pids.index(p)

    owners = records.user[records.tag_owner_rows()].astype(np.int64)
    tag = records.tag_idx.astype(np.int64)
    aff = party_of_user[owners] >= 0
    pairs = np.unique(tag[aff] * records.n_users + owners[aff])
    ptag = pairs // records.n_users
    pparty = party_of_user[pairs % records.n_users]
    counts = np.zeros((records.n_hashtags, len(pids)), dtype=np.int64)
    np.add.at(counts, (ptag, pparty), 1)

    used = np.flatnonzero(counts.sum(axis=1) > 0)
    counts = counts[used]
    dkl = np.array([relative_entropy_bits(row, sizes) for row in counts.tolist()], dtype=np.float64)
    n = counts.sum(axis=1, keepdims=True)
    return PoliticalScore(
        [records.interns.hashtags[int(i)] for i in used],
        dkl,
        counts / np.maximum(n, 1),
        counts,
        pids,
        sizes,
        kl_threshold,
    )
