from __future__ import annotations

import math
from datetime import date

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from opinionscape.affiliation import AffiliationResult
from opinionscape.dynamics import (DailyCounts, DescriptionVectors, UserTopicMatrix, daily_counts,
                                   description_vectors, iter_windows, load_daily, reference_vector, save_daily,
                                   user_profile_mean, window_vectors, write_matrices, write_vectors)
from opinionscape.ingest import CaptureConfig
from opinionscape.topics import TopicPartition

TAGS = ["a0", "a1", "b0", "b1", "c0", "c1", "d0", "d1", "loose"]
PART = TopicPartition(TAGS, [0, 0, 1, 1, 2, 2, 3, 3, -1], "test")


def matrix(rows, day=date(2019, 1, 1)) -> UserTopicMatrix:
    m = sp.csr_matrix(np.asarray(rows, dtype=np.int64))
    return UserTopicMatrix(day, 0, [f"u{i}" for i in range(m.shape[0])], m)


def test_worked_example_vector():
    # u_i = (2, 0) against reference T = (3, 1)
    dv = DescriptionVectors(matrix([[2, 0], [1, 1]]), np.array([3, 1]))
    assert np.allclose(dv.deviations([0])[0], [0.25, -0.25], atol=0, rtol=0)
    got = dv.vector("u0").vector
    assert abs(got[0] - 1 / math.sqrt(2)) <= 1e-15 and abs(got[1] + 1 / math.sqrt(2)) <= 1e-15


def test_window_reference_default_is_column_sums():
    dv = description_vectors(matrix([[2, 0], [1, 1]]))
    assert np.array_equal(dv.t, np.array([0.75, 0.25]))
    assert np.allclose(dv.dense([0])[0], [1 / math.sqrt(2), -1 / math.sqrt(2)])


def test_single_user_window_is_invalid():
    dv = description_vectors(matrix([[3, 1, 0]]))
    assert dv.n_valid == 0
    assert not dv.vector("u0").valid


def test_user_without_usage_is_invalid():
    dv = description_vectors(matrix([[0, 0], [2, 1], [0, 3]]))
    assert dv.valid.tolist() == [False, True, True]


def test_profile_equal_to_reference_is_invalid_exactly():
    # row 1 is proportional to the column sums (4, 2): rational check, not float
    dv = description_vectors(matrix([[1, 1], [2, 1], [1, 0]]))
    assert dv.valid.tolist() == [True, False, True]


def test_empty_window_degenerate():
    m = matrix(np.zeros((3, 4)))
    assert m.degenerate
    dv = description_vectors(m)
    assert dv.n_valid == 0
    assert dv.group_sum(np.ones(3, bool))[1] == 0


@given(st.integers(2, 40), st.integers(1, 12), st.integers(0, 2 ** 32 - 1), st.sampled_from(["window", "users"]))
@settings(max_examples=150, deadline=None)
def test_vector_contracts(n, k, seed, mode):
    rng = np.random.default_rng(seed)
    counts = rng.poisson(0.7, size=(n, k)) * (rng.random((n, k)) < 0.5)
    m = matrix(counts)
    ref = "window" if mode == "window" else user_profile_mean(m.counts)
    dv = DescriptionVectors(m, ref)
    assert np.array_equal(m.global_vector().values, counts.sum(axis=0))
    rows = np.flatnonzero(dv.valid)
    if len(rows) == 0:
        return
    v = dv.deviations(rows)
    d = dv.dense(rows)
    assert np.abs(v.sum(axis=1)).max() <= 1e-9
    assert np.abs(np.linalg.norm(d, axis=1) - 1).max() <= 1e-9
    assert np.allclose(np.linalg.norm(v, axis=1), dv.norms[rows], rtol=1e-12, atol=1e-15)
    total, cnt = dv.group_sum(np.ones(n, bool))
    assert cnt == len(rows)
    assert np.allclose(total, d.sum(axis=0), atol=1e-12)


def test_duplicating_rows_keeps_direction():
    base = matrix([[2, 1, 0], [0, 1, 3], [1, 1, 1]])
    dup = matrix([[200, 100, 0], [0, 1, 3], [1, 1, 1]])
    ref = np.array([1.0, 1.0, 1.0]) / 3
    a = DescriptionVectors(base, ref).dense([0])[0]
    b = DescriptionVectors(dup, ref).dense([0])[0]
    assert np.allclose(a, b, atol=1e-15)


def test_reference_modes():
    cfg = CaptureConfig(date(2019, 1, 1), date(2019, 1, 3), 2, 1)
    days = [sp.csr_matrix(np.array(x, dtype=np.int64)) for x in ([[4, 0], [0, 0]], [[0, 0], [1, 1]], [[0, 0], [0, 0]])]
    daily = DailyCounts(cfg, ["u0", "u1"], ["A", "B"], 2, days)
    assert np.allclose(reference_vector(daily, "users"), [0.75, 0.25])
    assert reference_vector(daily, "capture").tolist() == [5, 1]
    assert reference_vector(daily, "window") == "window"
    with pytest.raises(ValueError):
        reference_vector(daily, "bogus")
    with pytest.raises(ValueError):
        DescriptionVectors(matrix([[1, 0]]), "bogus")


def build_store(tweets):
    # u1 uses topic 1 twice on day 3 and a loose tag; u2 is unaffiliated; u3 spreads over days
    tweets.add("u1", ["b0", "b1"], 3).add("u1", ["loose"], 3)
    tweets.add("u2", ["a0"], 3)
    for d in range(0, 20, 2):
        tweets.add("u3", ["a0", "c1"], d)
    tweets.add("u3", ["d0"], 29)
    return tweets.store()


AFF = AffiliationResult({"u1": "A", "u2": None, "u3": "B"}, party_ids=["A", "B"])


def test_counts_in_every_window_containing_day(tweets):
    daily = daily_counts(build_store(tweets), PART, AFF)
    assert dict(zip(daily.users, daily.parties)) == {"u1": "A", "u3": "B"}
    r = daily.users.index("u1")
    for m in iter_windows(daily):
        covers = m.day - 6 <= 3 <= m.day
        assert m.counts[r, 1] == (2 if covers else 0)
        assert m.counts[r].sum() == (2 if covers else 0)


def test_incremental_equals_scratch(tweets):
    daily = daily_counts(build_store(tweets), PART, AFF)
    for inc, scratch in zip(iter_windows(daily, True), iter_windows(daily, False)):
        assert inc.date == scratch.date
        assert (inc.counts != scratch.counts).nnz == 0
        assert np.array_equal(inc.counts.toarray(), scratch.counts.toarray())


def test_window_dates_are_end_dates(tweets, config):
    daily = daily_counts(build_store(tweets), PART, AFF)
    dates = [m.date for m in iter_windows(daily)]
    assert dates[0] == config.capture_start and dates[-1] == config.capture_end
    assert len(dates) == config.n_days


def test_daily_persistence(tmp_path, tweets):
    daily = daily_counts(build_store(tweets), PART, AFF)
    save_daily(daily, tmp_path / "d")
    back = load_daily(tmp_path / "d")
    assert back.users == daily.users and back.parties == daily.parties
    assert all((a != b).nnz == 0 for a, b in zip(back.days, daily.days))


def test_dumps(tmp_path, tweets):
    daily = daily_counts(build_store(tweets), PART, AFF)
    windows = list(iter_windows(daily))
    write_matrices(windows, tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "date,user,topic,count"
    assert "2019-01-04,u1,1,2" in lines
    vecs = list(window_vectors(daily, "users"))
    write_vectors(vecs, tmp_path / "v.csv")
    rows = (tmp_path / "v.csv").read_text().splitlines()[1:]
    n_valid = sum(v.n_valid for v in vecs)
    assert len(rows) == n_valid * daily.n_topics
