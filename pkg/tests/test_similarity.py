from __future__ import annotations

import math
from datetime import date, timedelta

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from opinionscape.dynamics import DescriptionVector, DescriptionVectors, UserTopicMatrix
from opinionscape.similarity import (EmptyGroupError, SimilaritySeries, cross_similarity, group_vector,
                                     pair_similarity, pairwise_cross, pairwise_self, parse_requests, read_long,
                                     self_similarity, similarity_series, write_long)

D0 = date(2019, 1, 1)


def unit_rows(rng, n, k):
    x = rng.normal(size=(n, k))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def test_pair_examples():
    d = np.array([1 / math.sqrt(2), -1 / math.sqrt(2)])
    assert pair_similarity(d, d) == pytest.approx(1.0, abs=1e-15)
    assert pair_similarity(d, -d) == pytest.approx(-1.0, abs=1e-15)
    assert abs(pair_similarity(d, [1.0, 0.0]) - 1 / math.sqrt(2)) <= 1e-15


def test_pair_checks_window_and_dimension():
    a = DescriptionVector("a", D0, np.array([1.0, 0.0]), True)
    b = DescriptionVector("b", D0 + timedelta(1), np.array([1.0, 0.0]), True)
    with pytest.raises(ValueError):
        pair_similarity(a, b)
    with pytest.raises(ValueError):
        pair_similarity([1.0, 0.0], [1.0, 0.0, 0.0])
    bad = DescriptionVector("c", D0, np.zeros(2), False)
    with pytest.raises(ValueError):
        pair_similarity(a, bad)


def test_identical_members_self_one():
    d = np.array([[0.6, -0.8]] * 5)
    assert self_similarity(d)[0] == pytest.approx(1.0, abs=1e-15)
    assert cross_similarity(d, d) == pytest.approx(1.0, abs=1e-15)


def test_two_orthogonal_members_half():
    g = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert self_similarity(g)[0] == 0.5
    assert pairwise_self(g) == 0.5


def test_singleton_is_exactly_one():
    rng = np.random.default_rng(0)
    for row in unit_rows(rng, 50, 7):
        assert self_similarity(row[None, :]) == (1.0, 1)


def test_fifty_member_identity():
    g = unit_rows(np.random.default_rng(1), 50, 6)
    assert abs(self_similarity(g)[0] - pairwise_self(g)) <= 1e-9


def test_thirty_by_forty_cross_identity():
    rng = np.random.default_rng(2)
    a, b = unit_rows(rng, 30, 5), unit_rows(rng, 40, 5)
    assert abs(cross_similarity(a, b) - pairwise_cross(a, b)) <= 1e-9


@given(st.integers(1, 60), st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=100, deadline=None)
def test_ranges_and_collapse(n, k, seed):
    rng = np.random.default_rng(seed)
    g, h = unit_rows(rng, n, k), unit_rows(rng, n + 3, k)
    s = self_similarity(g)[0]
    assert 0.0 <= s <= 1.0
    assert -1.0 <= cross_similarity(g, h) <= 1.0
    if n > 1:
        assert cross_similarity(g, g) == s


@given(st.integers(2, 80), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=60, deadline=None)
def test_member_order_changes_nothing(n, seed):
    rng = np.random.default_rng(seed)
    g = unit_rows(rng, n, 6)
    perm = rng.permutation(n)
    assert self_similarity(g) == self_similarity(g[perm])
    assert np.array_equal(group_vector(g).mean, group_vector(g[perm]).mean)


def test_empty_group():
    with pytest.raises(EmptyGroupError):
        self_similarity(np.zeros((0, 3)))


def test_disjoint_topic_groups_are_negative():
    counts = np.array([[5, 1, 0, 0]] * 10 + [[0, 0, 4, 2]] * 10)
    m = UserTopicMatrix(D0, 0, [f"u{i}" for i in range(20)], sp.csr_matrix(counts))
    dv = DescriptionVectors(m)
    (s,) = similarity_series([dv], ["A"] * 10 + ["B"] * 10, [("cross", "A", "B")])
    assert s.values[0] < 0


def window_stack(rng, n_users, k, n_days, empty=()):
    users = [f"u{i}" for i in range(n_users)]
    for t in range(n_days):
        counts = rng.poisson(1.0, size=(n_users, k))
        if t in empty:
            counts[: n_users // 2] = 0
        yield DescriptionVectors(UserTopicMatrix(D0 + timedelta(t), t, users, sp.csr_matrix(counts)),
                                 np.full(k, 1.0 / k))


def test_series_matches_dense_computation():
    rng = np.random.default_rng(4)
    parties = ["A"] * 20 + ["B"] * 25 + ["C"] * 5
    windows = list(window_stack(rng, 50, 4, 6))
    series = similarity_series(windows, parties, parse_requests("all", "all", ["A", "B", "C"]))
    assert [s.label for s in series] == ["self:A", "self:B", "self:C", "cross:A:B", "cross:A:C", "cross:B:C"]
    p = np.array(parties)
    for s in series:
        for t, v in zip(s.dates, s.values):
            dv = windows[(t - D0).days]
            a = dv.dense(np.flatnonzero(dv.valid & (p == s.group_a)))
            b = dv.dense(np.flatnonzero(dv.valid & (p == s.group_b)))
            ref = pairwise_self(a) if s.kind == "self" else pairwise_cross(a, b)
            assert abs(v - ref) <= 1e-9


def test_gap_dates_are_omitted():
    rng = np.random.default_rng(5)
    parties = ["A"] * 10 + ["B"] * 10
    windows = list(window_stack(rng, 20, 3, 5, empty={2}))
    (sa, sb, cross) = similarity_series(windows, parties, [("self", "A"), ("self", "B"), ("cross", "A", "B")])
    assert D0 + timedelta(2) not in sa.dates
    assert D0 + timedelta(2) in sb.dates
    assert D0 + timedelta(2) not in cross.dates
    assert len(sb.dates) == 5


def test_unknown_party_rejected():
    with pytest.raises(ValueError):
        similarity_series([], ["A"], [("self", "Z")])


def test_parse_requests_with_aliases():
    resolve = {"JPC": "1", "FDT": "2", "1": "1", "2": "2"}.__getitem__
    reqs = parse_requests("JPC", "JPC:FDT", ["1", "2"], resolve)
    assert reqs == [("self", "1"), ("cross", "1", "2")]


def test_dates_strictly_increase():
    s = SimilaritySeries("self", "A", "A")
    s.append(D0, 0.5, 3, 3)
    with pytest.raises(ValueError):
        s.append(D0, 0.4, 3, 3)


def test_long_roundtrip(tmp_path):
    rng = np.random.default_rng(6)
    windows = list(window_stack(rng, 12, 3, 4))
    series = similarity_series(windows, ["A"] * 6 + ["B"] * 6, parse_requests("all", "all", ["A", "B"]))
    write_long(series, tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "date,kind,group_a,group_b,value,n_a,n_b"
    back = {s.label: s for s in read_long(tmp_path / "s.csv")}
    for s in series:
        assert back[s.label].values == s.values
        assert back[s.label].dates == s.dates
        assert back[s.label].n_a == s.n_a
