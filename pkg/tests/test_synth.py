from __future__ import annotations

import json
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from opinionscape.affiliation import PartyRoster, read_follows
from opinionscape.ingest import ConfigError
from opinionscape.synth import Event, GroundTruth, Realignment, SynthSpec, generate


def small_spec(**kw) -> SynthSpec:
    base = dict(parties=[{"party_id": "A", "n_users": 40, "preference": [0.7, 0.3, 0.0]},
                         {"party_id": "B", "n_users": 30, "preference": [0.0, 0.2, 0.8]}],
                n_topics=3, hashtags_per_topic=6, days=20, cutoff_day=10, seed=5)
    base.update(kw)
    return SynthSpec(**base)


def test_same_seed_byte_identical(tmp_path):
    generate(small_spec(), tmp_path / "a")
    generate(small_spec(), tmp_path / "b")
    for name in ("tweets.jsonl", "roster.csv", "follows.csv", "truth.json", "spec.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    generate(small_spec(seed=6), tmp_path / "c")
    assert (tmp_path / "a" / "tweets.jsonl").read_bytes() != (tmp_path / "c" / "tweets.jsonl").read_bytes()


def test_truth_consistent_with_corpus(tmp_path):
    spec = small_spec(unaffiliated_users=5)
    truth = generate(spec, tmp_path)
    assert GroundTruth.read(tmp_path / "truth.json") == truth
    roster = PartyRoster.read(tmp_path / "roster.csv")
    assert roster.party_ids == ["A", "B"]
    follows = read_follows(tmp_path / "follows.csv")
    for user, cands in follows.items():
        parties = {roster.party_of(c) for c in cands}
        if truth.affiliations[user] is not None:
            assert parties == {truth.affiliations[user]}
    tags_seen = set()
    with open(tmp_path / "tweets.jsonl") as fh:
        for line in fh:
            rec = json.loads(line)
            tags_seen.update(t.lstrip("#") for t in rec["hashtags"])
            if rec["is_retweet"]:
                assert rec["timestamp"] < spec.capture_config().day_start_ts(spec.cutoff)
    assert tags_seen <= set(truth.partition)


def test_topic_frequencies_converge_to_preferences(tmp_path):
    pref = [0.5, 0.3, 0.15, 0.05]
    spec = SynthSpec(parties=[{"party_id": "A", "n_users": 200, "preference": pref},
                              {"party_id": "B", "n_users": 2, "preference": [0.25] * 4}],
                     n_topics=4, hashtags_per_topic=5, days=100, tweets_per_user_day=5.0, tagged_fraction=1.0,
                     cross_topic_rate=0.0, user_concentration=None, seed=3)
    generate(spec, tmp_path)
    counts = Counter()
    with open(tmp_path / "tweets.jsonl") as fh:
        for line in fh:
            rec = json.loads(line)
            if rec["user_id"].startswith("uA_") and rec["hashtags"]:
                counts[int(rec["hashtags"][0][len("#topic"):].split("_")[0])] += 1
    n = sum(counts.values())
    assert n >= 100_000
    observed = [counts[t] for t in range(4)]
    assert chisquare(observed, np.array(pref) * n).pvalue > 1e-3


def test_event_adds_volume(tmp_path):
    spec = small_spec(events=[{"day": 12, "party": "A", "topic": 2, "intensity": 5.0}], cross_topic_rate=0.0)
    generate(spec, tmp_path)
    per_day = Counter()
    start = spec.capture_config().start_ts
    with open(tmp_path / "tweets.jsonl") as fh:
        for line in fh:
            rec = json.loads(line)
            if rec["user_id"].startswith("uA_") and rec["hashtags"] and rec["hashtags"][0].startswith("#topic2_"):
                per_day[(rec["timestamp"] - start) // 86400] += 1
    # A never prefers topic 2, so the event is its only source
    assert set(per_day) == {12}
    expected = 40 * spec.tweets_per_user_day * spec.tagged_fraction * 4.0
    assert abs(per_day[12] - expected) < 4 * expected ** 0.5


def test_spec_validation(tmp_path):
    with pytest.raises(ConfigError):
        small_spec(parties=[{"party_id": "A", "n_users": 1, "preference": [1, 0, 0]}])
    with pytest.raises(ConfigError):
        small_spec(events=[Event(30, "A", 0)])
    with pytest.raises(ConfigError):
        small_spec(realignments=[Realignment(3, "A", [0.5, 0.5, 0.5])])
    with pytest.raises(ConfigError):
        small_spec(parties=[{"party_id": "A", "n_users": 3, "preference": [0.5, 0.5]},
                            {"party_id": "B", "n_users": 3, "preference": [0.5, 0.5]}])


def test_spec_yaml_with_dates(tmp_path):
    p = tmp_path / "spec.yaml"
    p.write_text("parties:\n"
                 "  - {party_id: A, n_users: 3, preference: [1.0, 0.0]}\n"
                 "  - {party_id: B, n_users: 3, preference: [0.0, 1.0]}\n"
                 "n_topics: 2\nstart: 2019-03-01\ndays: 10\ncutoff_day: 5\n"
                 "events: [{day: 2019-03-04, party: A, topic: 1}]\n")
    spec = SynthSpec.read(p)
    assert spec.events[0].day == 3
    assert SynthSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec
