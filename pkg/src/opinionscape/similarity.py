"""Pairwise, within-group and cross-group similarity of description vectors."""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np

from .dynamics import DescriptionVector, DescriptionVectors


class EmptyGroupError(ValueError):
    pass


@dataclass
class GroupVector:
    group: str
    date: date | None
    mean: np.ndarray
    size: int


@dataclass
class SimilaritySeries:
    kind: str  # "self" or "cross"
    group_a: str
    group_b: str
    dates: list[date] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    n_a: list[int] = field(default_factory=list)
    n_b: list[int] = field(default_factory=list)

    @property
    def label(self) -> str:
        if self.kind == "self":
            return f"self:{self.group_a}"
        return f"cross:{self.group_a}:{self.group_b}"

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def append(self, day: date, value: float, n_a: int, n_b: int) -> None:
        if self.dates and day <= self.dates[-1]:
            raise ValueError("series dates must be strictly increasing")
        self.dates.append(day)
        self.values.append(value)
        self.n_a.append(n_a)
        self.n_b.append(n_b)


def pair_similarity(d_i, d_j) -> float:
    """Cosine similarity of two unit description vectors (their inner product)."""
    if isinstance(d_i, DescriptionVector) and isinstance(d_j, DescriptionVector):
        if d_i.date != d_j.date:
            raise ValueError("vectors belong to different windows")
        if not (d_i.valid and d_j.valid):
            raise ValueError("invalid description vector")
        d_i, d_j = d_i.vector, d_j.vector
    a = np.asarray(d_i, dtype=np.float64)
    b = np.asarray(d_j, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.clip(a @ b, -1.0, 1.0))


def group_vector(vectors, group: str = "", day: date | None = None) -> GroupVector:
    """Mean of a group's unit vectors (rows of a 2-D array)."""
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise EmptyGroupError("empty group")
    n = arr.shape[0]
    # fsum is correctly rounded, so the mean does not depend on member order
    mean = np.array([math.fsum(col) for col in arr.T]) / n
    return GroupVector(group, day, mean, n)


def _as_group(g) -> GroupVector:
    return g if isinstance(g, GroupVector) else group_vector(g)


def self_similarity(group) -> tuple[float, int]:
    """Average similarity over all ordered member pairs, diagonal included.

    Equals the squared norm of the group mean. Returns ``(value, size)``.
    """
    g = _as_group(group)
    if g.size == 0:
        raise EmptyGroupError("empty group")
    if g.size == 1:
        return 1.0, 1
    return float(min(1.0, g.mean @ g.mean)), g.size


def cross_similarity(group1, group2) -> float:
    """Average similarity over member pairs drawn from two groups."""
    g1, g2 = _as_group(group1), _as_group(group2)
    if g1.size == 0 or g2.size == 0:
        raise EmptyGroupError("empty group")
    if g1.mean.shape != g2.mean.shape:
        raise ValueError("dimension mismatch")
    return float(np.clip(g1.mean @ g2.mean, -1.0, 1.0))


def pairwise_self(vectors) -> float:
    """Brute-force ``sum_ij <d_i, d_j> / |G|^2``; reference for ``self_similarity``."""
    arr = np.asarray(vectors, dtype=np.float64)
    return math.fsum((arr @ arr.T).sum(axis=1)) / arr.shape[0] ** 2


def pairwise_cross(vectors1, vectors2) -> float:
    a = np.asarray(vectors1, dtype=np.float64)
    b = np.asarray(vectors2, dtype=np.float64)
    return math.fsum((a @ b.T).sum(axis=1)) / (a.shape[0] * b.shape[0])


def parse_requests(self_spec: str | None, cross_spec: str | None, parties: Sequence[str],
                   resolve=None) -> list[tuple[str, ...]]:
    """Turn ``--self all|A,B`` and ``--cross A:B,C:D`` strings into series requests."""
    resolve = resolve or (lambda x: x)
    requests: list[tuple[str, ...]] = []
    if self_spec:
        names = parties if self_spec == "all" else [resolve(s) for s in self_spec.split(",") if s]
        requests += [("self", p) for p in names]
    if cross_spec:
        if cross_spec == "all":
            requests += [("cross", a, b) for i, a in enumerate(parties) for b in parties[i + 1:]]
        else:
            for item in cross_spec.split(","):
                if not item:
                    continue
                a, b = item.split(":")
                requests.append(("cross", resolve(a), resolve(b)))
    return requests


def similarity_series(windows: Iterable[DescriptionVectors], parties: Sequence[str],
                      requests: Sequence[tuple[str, ...]], known: Sequence[str] | None = None) -> list[SimilaritySeries]:
    """Self/cross similarity per window for each request.

    ``parties`` gives the party of each matrix row. Requests are
    ``("self", P)`` or ``("cross", P, Q)``. Dates where a group has no valid
    vector are left out of that series.
    """
    party_arr = np.asarray(parties, dtype=object)
    known_set = set(known) if known is not None else set(parties)
    series: list[SimilaritySeries] = []
    for req in requests:
        kind = req[0]
        if kind not in ("self", "cross"):
            raise ValueError(f"unknown request kind {kind!r}")
        groups = req[1:2] if kind == "self" else req[1:3]
        for g in groups:
            if g not in known_set:
                raise ValueError(f"unknown party {g!r}")
        series.append(SimilaritySeries(kind, groups[0], groups[-1]))
    needed = sorted({g for s in series for g in (s.group_a, s.group_b)})
    masks = {g: party_arr == g for g in needed}
    for dv in windows:
        means: dict[str, GroupVector] = {}
        for g in needed:
            total, n = dv.group_sum(masks[g])
            if n:
                means[g] = GroupVector(g, dv.date, total / n, n)
        for s in series:
            a, b = means.get(s.group_a), means.get(s.group_b)
            if a is None or b is None:
                continue
            value = self_similarity(a)[0] if s.kind == "self" else cross_similarity(a, b)
            s.append(dv.date, value, a.size, b.size)
    return series


LONG_HEADER = ["date", "kind", "group_a", "group_b", "value", "n_a", "n_b"]


def write_long(series: Iterable[SimilaritySeries], path: str | Path) -> None:
    rows = []
    for s in series:
        for d, v, na, nb in zip(s.dates, s.values, s.n_a, s.n_b):
            rows.append((d.isoformat(), s.kind, s.group_a, s.group_b, repr(float(v)), na, nb))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LONG_HEADER)
        w.writerows(rows)


def read_long(path: str | Path) -> list[SimilaritySeries]:
    by_key: dict[tuple[str, str, str], SimilaritySeries] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (row["kind"], row["group_a"], row["group_b"])
            s = by_key.get(key)
            if s is None:
                s = by_key[key] = SimilaritySeries(*key)
            s.append(date.fromisoformat(row["date"]), float(row["value"]), int(row["n_a"]), int(row["n_b"]))
    return list(by_key.values())
