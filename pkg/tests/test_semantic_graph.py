from __future__ import annotations

import itertools
import math
import random
from collections import defaultdict
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opinionscape.affiliation import AffiliationResult
from opinionscape.semantic_graph import (CooccurrenceGraph, PoliticalScore, build_graph, pair_user_counts,
                                         political_scores, relative_entropy_bits)


def brute_weights(records) -> dict[tuple[str, str], int]:
    users = defaultdict(set)
    for r in records:
        for a, b in itertools.combinations(sorted(set(r.hashtags)), 2):
            users[(a, b)].add(r.user_id)
    return {k: len(v) for k, v in users.items()}


def test_seven_tweet_fixture_weight_three(tweets):
    tweets.add("A", ["x", "y"]).add("B", ["x", "y"])
    for d in range(5):
        tweets.add("C", ["x", "y"], day=d)
    g = build_graph(tweets.store(), min_weight=1)
    assert g.edge_weight("x", "y") == 3
    assert g.edge_weight("y", "x") == 3
    assert build_graph(tweets.store(), min_weight=3).n_edges == 1
    assert build_graph(tweets.store(), min_weight=4).n_nodes == 0


def test_single_triple_pruned(tweets):
    tweets.add("u", ["x", "y", "z"])
    assert build_graph(tweets.store(), 1).n_edges == 3
    g = build_graph(tweets.store(), 5)
    assert g.n_edges == 0 and g.n_nodes == 0


def random_tweets(tweets, seed, n=300, users=12, tags=8):
    rng = random.Random(seed)
    for _ in range(n):
        k = rng.randint(0, 4)
        tweets.add(f"u{rng.randrange(users)}", [f"h{rng.randrange(tags)}" for _ in range(k)], rng.randrange(20),
                   is_retweet=rng.random() < 0.2)
    return tweets


@pytest.mark.parametrize("seed", range(5))
def test_weights_match_brute_force(tweets, seed):
    store = random_tweets(tweets, seed).store()
    expected = brute_weights(store)
    g = build_graph(store, 1)
    got = {tuple(sorted((g.tags[a], g.tags[b]))): int(w) for a, b, w in zip(g.src, g.dst, g.weight)}
    assert got == expected
    assert (g.src < g.dst).all()
    for t, n in zip(g.tags, g.node_users):
        assert n == len({r.user_id for r in store if t in r.hashtags})


@pytest.mark.parametrize("seed", range(3))
def test_duplicating_a_user_changes_no_weight(tweets, seed, config):
    from .conftest import Tweets

    random_tweets(tweets, seed)
    base = build_graph(tweets.store(), 1)
    dup = Tweets(config)
    dup.records = list(tweets.records)
    victim = tweets.records[0].user_id
    for r in tweets.records:
        if r.user_id == victim:
            for _ in range(100):
                dup.add(victim, r.hashtags, 5)
    g = build_graph(dup.store(), 1)
    assert g.tags == base.tags
    assert np.array_equal(g.weight, base.weight)


@pytest.mark.parametrize("seed", range(3))
def test_raising_min_weight_only_removes_edges(tweets, seed):
    store = random_tweets(tweets, seed, n=600).store()
    edges = []
    for m in range(1, 6):
        g = build_graph(store, m)
        edges.append({(g.tags[a], g.tags[b]): w for a, b, w in zip(g.src, g.dst, g.weight)})
        assert all(w >= m for w in edges[-1].values())
    for lo, hi in zip(edges, edges[1:]):
        assert all(lo[k] == v for k, v in hi.items())
        assert set(hi) <= set(lo)


def test_graph_roundtrip_and_interchange(tmp_path, tweets):
    store = random_tweets(tweets, 7).store()
    g = build_graph(store, 2)
    g.write(tmp_path / "g")
    back = CooccurrenceGraph.read(tmp_path / "g")
    assert back.tags == g.tags
    assert np.array_equal(back.weight, g.weight)
    lines = (tmp_path / "g" / "interchange.edges").read_text().split("\n")
    i, j, w = lines[0].split()
    assert g.edge_weight(g.tags[int(i) - 1], g.tags[int(j) - 1]) == int(w)
    nx_g = g.to_networkx()
    assert nx_g.number_of_edges() == g.n_edges


def test_pair_counts_are_per_user(tweets):
    tweets.add("a", ["x", "y"]).add("a", ["y", "x"], 1).add("b", ["x", "y", "z"])
    a, b, n = pair_user_counts(tweets.store())
    assert sorted(n.tolist()) == [1, 1, 2]


def test_kl_identical_is_exactly_zero():
    assert relative_entropy_bits([5, 3, 2], [50, 30, 20]) == 0.0
    assert relative_entropy_bits([1, 1], [7, 7]) == 0.0


def test_kl_one_bit():
    assert abs(relative_entropy_bits([4, 0], [10, 10]) - 1.0) <= 1e-12


@given(st.lists(st.integers(1, 40), min_size=2, max_size=6), st.integers(1, 5))
def test_kl_zero_iff_proportional(sizes, k):
    assert relative_entropy_bits([s * k for s in sizes], sizes) == 0.0


@given(st.lists(st.tuples(st.integers(0, 30), st.integers(1, 30)), min_size=2, max_size=5))
@settings(max_examples=200)
def test_kl_nonnegative_and_matches_rational_formula(pairs):
    counts = [c for c, _ in pairs]
    sizes = [s for _, s in pairs]
    if sum(counts) == 0:
        return
    got = relative_entropy_bits(counts, sizes)
    assert got >= 0
    n, total = sum(counts), sum(sizes)
    ref = math.fsum(Fraction(c, n) * math.log2(Fraction(c * total, n * s)) for c, s in pairs if c)
    assert abs(got - max(ref, 0.0)) < 1e-9
    proportional = all(Fraction(c, n) == Fraction(s, total) for c, s in pairs)
    assert (got == 0.0) == proportional


def test_political_scores_and_boundary(tweets):
    # A and B have two users each; "own" is used only by A, "both" by one user of each
    tweets.add("a1", ["own", "both"]).add("a2", ["own"]).add("b1", ["both"]).add("b2", ["other"])
    tweets.add("a1", ["own"], 3)
    aff = AffiliationResult({"a1": "A", "a2": "A", "b1": "B", "b2": "B", "x": None}, party_ids=["A", "B"])
    scores = political_scores(tweets.store(), aff)
    by_tag = dict(zip(scores.tags, scores.dkl))
    assert abs(by_tag["own"] - 1.0) <= 1e-12
    assert by_tag["both"] == 0.0
    assert np.allclose(scores.shares.sum(axis=1), 1.0)
    assert "own" in scores.political_tags() and "both" not in scores.political_tags()
    at_boundary = PoliticalScore(["t"], np.array([0.5]), np.array([[1.0, 0.0]]), np.zeros((1, 2)),
                                 ["A", "B"], np.array([1, 1]), 0.5)
    assert at_boundary.is_political.tolist() == [True]
    just_below = PoliticalScore(["t"], np.array([np.nextafter(0.5, 0)]), np.array([[1.0, 0.0]]),
                                np.zeros((1, 2)), ["A", "B"], np.array([1, 1]), 0.5)
    assert just_below.is_political.tolist() == [False]


def test_political_roundtrip(tmp_path, tweets):
    tweets.add("a1", ["own"]).add("b1", ["both"]).add("a1", ["both"])
    aff = AffiliationResult({"a1": "A", "b1": "B"}, party_ids=["A", "B"])
    scores = political_scores(tweets.store(), aff)
    scores.write(tmp_path / "p.csv")
    back = PoliticalScore.read(tmp_path / "p.csv")
    assert back.tags == scores.tags
    assert np.array_equal(back.dkl, scores.dkl)
    assert back.political_tags() == scores.political_tags()


def test_political_needs_two_parties(tweets):
    tweets.add("a1", ["x"])
    with pytest.raises(ValueError):
        political_scores(tweets.store(), AffiliationResult({"a1": "A"}, party_ids=["A", "B"]))
