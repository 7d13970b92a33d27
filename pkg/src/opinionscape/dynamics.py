"""Sliding-window user-topic matrices and per-user description vectors."""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import kernels
from .affiliation import AffiliationResult
from .ingest import CaptureConfig, RecordStore
from .topics import TopicPartition


@dataclass
class GlobalTopicVector:
    date: date
    values: np.ndarray


@dataclass
class UserTopicMatrix:
    """Topic usage counts of affiliated users over the window ending on ``date``.

    Rows follow ``users`` (shared by every window of a run).
    """

    date: date
    day: int
    users: Sequence[str]
    counts: sp.csr_matrix

    @property
    def degenerate(self) -> bool:
        return self.counts.nnz == 0

    @property
    def n_topics(self) -> int:
        return self.counts.shape[1]

    def global_vector(self) -> GlobalTopicVector:
        return GlobalTopicVector(self.date, np.asarray(self.counts.sum(axis=0), dtype=np.int64).ravel())


@dataclass
class DailyCounts:
    """Per-day topic usage of affiliated users; the base for all windows."""

    config: CaptureConfig
    users: list[str]
    parties: list[str]
    n_topics: int
    days: list[sp.csr_matrix]

    def window(self, day: int, width: int | None = None) -> sp.csr_matrix:
        width = width or self.config.window_days
        lo = max(0, day - width + 1)
        acc = self.days[lo].copy()
        for d in range(lo + 1, day + 1):
            acc = acc + self.days[d]
        acc.sort_indices()
        return acc

    def capture_totals(self) -> np.ndarray:
        total = np.zeros(self.n_topics, dtype=np.int64)
        for m in self.days:
            total += np.asarray(m.sum(axis=0), dtype=np.int64).ravel()
        return total


def daily_counts(records: RecordStore, partition: TopicPartition,
                 affiliations: AffiliationResult, config: CaptureConfig | None = None) -> DailyCounts:
    """Count hashtag uses per (day, affiliated user, topic); unassigned hashtags are ignored."""
    config = config or records.config
    aff = affiliations.affiliated()
    row_of = np.full(records.n_users, -1, dtype=np.int64)
    users: list[str] = []
    parties: list[str] = []
    for uid in np.unique(records.user).tolist():
        name = records.interns.users[uid]
        p = aff.get(name)
        if p is not None:
            row_of[uid] = len(users)
            users.append(name)
            parties.append(p)
    n_rows, n_topics, n_days = len(users), partition.n_topics, config.n_days

    topic_of_tag = partition.lookup(records.interns.hashtags.items)
    owner = records.tag_owner_rows()
    rows = row_of[records.user[owner]]
    topics = topic_of_tag[records.tag_idx] if len(records.tag_idx) else np.zeros(0, dtype=np.int64)
    days = config.day_index(records.ts)[owner]
    ok = (rows >= 0) & (topics >= 0) & (days >= 0) & (days < n_days)
    key = (days[ok] * max(n_rows, 1) + rows[ok]) * max(n_topics, 1) + topics[ok]
    uniq, cnt = np.unique(key, return_counts=True)
    k_day = uniq // (max(n_rows, 1) * max(n_topics, 1))
    rem = uniq % (max(n_rows, 1) * max(n_topics, 1))
    k_row, k_topic = rem // max(n_topics, 1), rem % max(n_topics, 1)
    bounds = np.searchsorted(k_day, np.arange(n_days + 1))
    mats = []
    for d in range(n_days):
        s, e = bounds[d], bounds[d + 1]
        m = sp.csr_matrix((cnt[s:e].astype(np.int64), (k_row[s:e], k_topic[s:e])),
                          shape=(n_rows, n_topics), dtype=np.int64)
        m.sort_indices()
        mats.append(m)
    return DailyCounts(config, users, parties, n_topics, mats)


def iter_windows(daily: DailyCounts, incremental: bool = True) -> Iterator[UserTopicMatrix]:
    """One matrix per calendar day, covering the trailing ``window_days`` (clipped at capture start).

    The incremental path adds the entering day and subtracts the leaving one.
    """
    w = daily.config.window_days
    acc = None
    for t in range(len(daily.days)):
        if not incremental:
            m = daily.window(t, w)
        else:
            acc = daily.days[t].copy() if acc is None else acc + daily.days[t]
            if t - w >= 0:
                acc = acc - daily.days[t - w]
            acc.eliminate_zeros()
            acc.sort_indices()
            m = acc
        yield UserTopicMatrix(daily.config.date_of(t), t, daily.users, m)


def window_matrices(records: RecordStore, partition: TopicPartition, affiliations: AffiliationResult,
                    config: CaptureConfig | None = None, incremental: bool = True) -> list[UserTopicMatrix]:
    return list(iter_windows(daily_counts(records, partition, affiliations, config), incremental))


@dataclass
class DescriptionVector:
    user: str
    date: date
    vector: np.ndarray
    valid: bool


REFERENCES = ("users", "capture", "window", "window-users")


def _row_profiles(counts: sp.csr_matrix) -> sp.csr_matrix:
    sums = np.asarray(counts.sum(axis=1), dtype=np.float64).ravel()
    scale = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums > 0)
    return sp.diags(scale) @ counts.astype(np.float64)


def user_profile_mean(counts: sp.csr_matrix) -> np.ndarray:
    """Average of the normalized rows with any usage (each user weighs the same)."""
    sums = np.asarray(counts.sum(axis=1)).ravel()
    n = int((sums > 0).sum())
    if n == 0:
        return np.zeros(counts.shape[1])
    return np.asarray(_row_profiles(counts).sum(axis=0)).ravel() / n


def reference_vector(daily: DailyCounts, mode: str = "users"):
    """Reference usage profile subtracted from every user's profile.

    ``users``: capture-wide, every affiliated user weighted equally.
    ``capture``: capture-wide raw column sums.
    ``window`` / ``window-users``: recomputed inside each window (returned as the mode string).
    """
    if mode == "users":
        total = daily.days[0].copy() if daily.days else sp.csr_matrix((len(daily.users), daily.n_topics))
        for m in daily.days[1:]:
            total = total + m
        return user_profile_mean(total)
    if mode == "capture":
        return daily.capture_totals()
    if mode in ("window", "window-users"):
        return mode
    raise ValueError(f"unknown reference {mode!r}; choose from {REFERENCES}")


class DescriptionVectors:
    """Description vectors of every row of one window, held implicitly.

    For a valid row, ``d_i = alpha_i * u_i - beta_i * t`` where ``t`` is the
    reference profile; nothing dense is built unless asked for. ``reference``
    is None or ``"window"`` (this window's column sums), ``"window-users"``
    (this window's equal-weight profile mean), an integer count vector, or a
    float probability vector.
    """

    def __init__(self, matrix: UserTopicMatrix, reference=None):
        self.date = matrix.date
        self.users = matrix.users
        self.counts = matrix.counts
        self.global_vector = matrix.global_vector()
        n = self.counts.shape[0]
        self.valid = np.zeros(n, dtype=bool)
        self.norms = np.zeros(n)
        self.row_sums = np.asarray(self.counts.sum(axis=1), dtype=np.int64).ravel()
        if reference is None or (isinstance(reference, str) and reference == "window"):
            reference = self.global_vector.values
        elif isinstance(reference, str) and reference == "window-users":
            reference = user_profile_mean(self.counts)
        elif isinstance(reference, str):
            raise ValueError(f"unknown reference {reference!r}")
        ref = np.asarray(reference)
        exact = np.issubdtype(ref.dtype, np.integer)
        ref_total = ref.sum()
        if ref_total <= 0 or self.counts.nnz == 0:
            self.t = np.zeros(len(ref))
            return
        self.t = ref / ref_total if exact else ref.astype(np.float64)
        c = self.counts
        freqs = c.data / np.repeat(np.maximum(self.row_sums, 1), np.diff(c.indptr))
        norms = kernels.deviation_norms(c.indptr.astype(np.int64), c.indices.astype(np.int32),
                                        freqs.astype(np.float64), self.t)
        valid = (self.row_sums > 0) & (norms > 0)
        valid &= ~self._equal_to_reference(ref, exact, freqs)
        self.valid = valid
        self.norms = np.where(valid, norms, 0.0)

    def _equal_to_reference(self, ref: np.ndarray, exact: bool, freqs: np.ndarray) -> np.ndarray:
        """Rows whose usage profile equals the reference exactly.

        Integer references are compared as rationals, float ones bitwise.
        """
        c = self.counts
        out = np.zeros(c.shape[0], dtype=bool)
        support = int((ref > 0).sum())
        candidates = np.flatnonzero((np.diff(c.indptr) == support) & (self.row_sums > 0))
        ref_total = int(ref.sum()) if exact else None
        for i in candidates.tolist():
            s, e = c.indptr[i], c.indptr[i + 1]
            cols = c.indices[s:e].tolist()
            if exact:
                n = int(self.row_sums[i])
                out[i] = all(int(v) * ref_total == int(ref[j]) * n for j, v in zip(cols, c.data[s:e].tolist()))
            else:
                out[i] = all(f == self.t[j] for j, f in zip(cols, freqs[s:e].tolist()))
        return out

    @property
    def n_topics(self) -> int:
        return self.counts.shape[1]

    @property
    def n_valid(self) -> int:
        return int(self.valid.sum())

    def _scales(self):
        safe = np.where(self.valid, self.norms, 1.0)
        beta = np.where(self.valid, 1.0 / safe, 0.0)
        alpha = np.where(self.valid, beta / np.maximum(self.row_sums, 1), 0.0)
        return alpha, beta

    def deviations(self, rows=None) -> np.ndarray:
        """Pre-normalization vectors ``u_i/|u_i|_1 - t`` (dense) for ``rows`` (default: valid rows)."""
        rows = np.flatnonzero(self.valid) if rows is None else np.asarray(rows)
        u = self.counts[rows].toarray().astype(np.float64)
        return u / np.maximum(self.row_sums[rows], 1)[:, None] - self.t

    def dense(self, rows=None) -> np.ndarray:
        """Unit description vectors (dense) for ``rows`` (default: valid rows)."""
        rows = np.flatnonzero(self.valid) if rows is None else np.asarray(rows)
        return self.deviations(rows) / np.where(self.norms[rows] > 0, self.norms[rows], 1.0)[:, None]

    def vector(self, user: str) -> DescriptionVector:
        i = list(self.users).index(user)
        if not self.valid[i]:
            return DescriptionVector(user, self.date, np.zeros(self.n_topics), False)
        return DescriptionVector(user, self.date, self.dense([i])[0], True)

    def group_sum(self, mask: np.ndarray) -> tuple[np.ndarray, int]:
        """Sum of valid description vectors selected by ``mask`` and their count."""
        sel = np.asarray(mask, dtype=bool) & self.valid
        n = int(sel.sum())
        if n == 0:
            return np.zeros(self.n_topics), 0
        alpha, beta = self._scales()
        weights = np.where(sel, alpha, 0.0)
        csc = self.counts.tocsc()
        # correctly rounded sums keep the result independent of row order
        total = np.array([math.fsum(csc.data[a:b] * weights[csc.indices[a:b]])
                          for a, b in zip(csc.indptr[:-1], csc.indptr[1:])])
        return total - math.fsum(beta[sel]) * self.t, n


def description_vectors(matrix: UserTopicMatrix, reference=None) -> DescriptionVectors:
    """Description vectors of one window.

    With ``reference=None`` the window's own column sums are the reference.
    Users with no topic usage, or whose usage profile equals the reference,
    are marked invalid. A degenerate matrix gives an all-invalid result.
    """
    return DescriptionVectors(matrix, reference)


def window_vectors(daily: DailyCounts, reference: str = "users",
                   incremental: bool = True) -> Iterator[DescriptionVectors]:
    """Description vectors for every window of a run under one reference mode."""
    ref = reference_vector(daily, reference)
    for m in iter_windows(daily, incremental):
        yield DescriptionVectors(m, ref)


def write_matrices(windows: Sequence[UserTopicMatrix], path: str | Path) -> None:
    """Sparse triplets ``date,user,topic,count``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "user", "topic", "count"])
        for m in windows:
            c = m.counts.tocoo()
            day = m.date.isoformat()
            for r, j, v in zip(c.row.tolist(), c.col.tolist(), c.data.tolist()):
                w.writerow([day, m.users[r], j, v])


def write_vectors(vectors: Sequence[DescriptionVectors], path: str | Path) -> None:
    """Dense components ``date,user,topic,component`` of valid vectors."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "user", "topic", "component"])
        for dv in vectors:
            rows = np.flatnonzero(dv.valid)
            dense = dv.dense(rows)
            day = dv.date.isoformat()
            for r, vec in zip(rows.tolist(), dense):
                user = dv.users[r]
                for j, x in enumerate(vec.tolist()):
                    w.writerow([day, user, j, repr(x)])


def save_daily(daily: DailyCounts, directory: str | Path) -> None:
    """Compact on-disk form: day/row/topic/count triplets plus row metadata."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    parts = [m.tocoo() for m in daily.days]
    day = np.concatenate([np.full(p.nnz, i, dtype=np.int64) for i, p in enumerate(parts)] or [np.zeros(0, np.int64)])
    row = np.concatenate([p.row.astype(np.int64) for p in parts] or [np.zeros(0, np.int64)])
    col = np.concatenate([p.col.astype(np.int64) for p in parts] or [np.zeros(0, np.int64)])
    val = np.concatenate([p.data.astype(np.int64) for p in parts] or [np.zeros(0, np.int64)])
    np.save(d / "daily.npy", np.stack([day, row, col, val]) if len(day) else np.zeros((4, 0), np.int64))
    meta = {"config": daily.config.to_dict(), "users": daily.users, "parties": daily.parties,
            "n_topics": daily.n_topics}
    (d / "daily.json").write_text(json.dumps(meta, ensure_ascii=False) + "\n", encoding="utf-8")


def load_daily(directory: str | Path) -> DailyCounts:
    d = Path(directory)
    meta = json.loads((d / "daily.json").read_text(encoding="utf-8"))
    config = CaptureConfig.from_dict(meta["config"])
    arr = np.load(d / "daily.npy")
    n_rows, n_topics = len(meta["users"]), meta["n_topics"]
    bounds = np.searchsorted(arr[0], np.arange(config.n_days + 1))
    days = []
    for i in range(config.n_days):
        s, e = bounds[i], bounds[i + 1]
        m = sp.csr_matrix((arr[3, s:e], (arr[1, s:e], arr[2, s:e])), shape=(n_rows, n_topics), dtype=np.int64)
        m.sort_indices()
        days.append(m)
    return DailyCounts(config, meta["users"], meta["parties"], n_topics, days)
