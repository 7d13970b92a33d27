"""Synthetic tweet corpora with planted topics, party preferences, events and realignments."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import yaml

from .affiliation import Party, PartyRoster, write_follows
from .ingest import CaptureConfig, ConfigError


@dataclass
class PartySpec:
    party_id: str
    n_users: int
    preference: list[float]
    acronym: str = ""


@dataclass
class Event:
    """Extra tagged volume on ``topic`` from ``party`` for ``duration`` days.

    On those days the party's tagged-tweet rate is multiplied by
    ``intensity``; all the added volume goes to ``topic``.
    """

    day: int
    party: str
    topic: int
    intensity: float = 5.0
    duration: int = 1


@dataclass
class Realignment:
    """From ``day`` on, ``party`` draws topics from ``preference``."""

    day: int
    party: str
    preference: list[float]


@dataclass
class SynthSpec:
    parties: list[PartySpec]
    n_topics: int = 5
    hashtags_per_topic: int = 30
    start: date = date(2019, 1, 1)
    days: int = 90
    tweets_per_user_day: float = 1.4
    tagged_fraction: float = 0.14
    max_hashtags: int = 3
    cross_topic_rate: float = 0.02
    user_concentration: float | None = 20.0
    unaffiliated_users: int = 0
    candidates_per_party: int = 2
    cutoff_day: int = 30
    candidate_retweets: float = 3.0
    follow_only_fraction: float = 0.3
    utc_offset_hours: float = -3.0
    events: list[Event] = field(default_factory=list)
    realignments: list[Realignment] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        self.start = _to_date(self.start)
        self.parties = [p if isinstance(p, PartySpec) else PartySpec(**p) for p in self.parties]
        self.events = [self._event(e) for e in self.events]
        self.realignments = [self._realign(r) for r in self.realignments]
        self.validate()

    def _day(self, value) -> int:
        if isinstance(value, int):
            return value
        return (_to_date(value) - self.start).days

    def _event(self, e) -> Event:
        if isinstance(e, Event):
            return e
        e = dict(e)
        e["day"] = self._day(e["day"])
        return Event(**e)

    def _realign(self, r) -> Realignment:
        if isinstance(r, Realignment):
            return r
        r = dict(r)
        r["day"] = self._day(r["day"])
        return Realignment(**r)

    def validate(self) -> None:
        if self.n_topics < 1 or self.hashtags_per_topic < 1:
            raise ConfigError("empty hashtag vocabulary")
        if len(self.parties) < 2:
            raise ConfigError("need at least two parties")
        ids = [p.party_id for p in self.parties]
        for p in self.parties:
            _check_pref(p.preference, self.n_topics, p.party_id)
        for e in self.events:
            if e.party not in ids or not 0 <= e.topic < self.n_topics:
                raise ConfigError(f"bad event {e}")
            if not 0 <= e.day < self.days:
                raise ConfigError(f"event day {e.day} outside capture")
        for r in self.realignments:
            if r.party not in ids:
                raise ConfigError(f"bad realignment {r}")
            if not 0 <= r.day < self.days:
                raise ConfigError(f"realignment day {r.day} outside capture")
            _check_pref(r.preference, self.n_topics, r.party)
        if not 0 < self.cutoff_day <= self.days:
            raise ConfigError("cutoff_day outside capture")

    @property
    def end(self) -> date:
        return self.start + timedelta(days=self.days - 1)

    @property
    def cutoff(self) -> date:
        return self.start + timedelta(days=self.cutoff_day)

    def capture_config(self, probe_days: int = 30, window_days: int = 7) -> CaptureConfig:
        return CaptureConfig(self.start, self.end, window_days, probe_days, self.utc_offset_hours)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["start"] = self.start.isoformat()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SynthSpec:
        return cls(**d)

    @classmethod
    def read(cls, path: str | Path) -> SynthSpec:
        return cls.from_dict(yaml.safe_load(Path(path).read_text(encoding="utf-8")))


def _to_date(value) -> date:
    return value if isinstance(value, date) else date.fromisoformat(str(value))


def _check_pref(pref, n_topics, who) -> None:
    if len(pref) != n_topics:
        raise ConfigError(f"{who}: preference has {len(pref)} entries, expected {n_topics}")
    if min(pref) < 0 or abs(sum(pref) - 1.0) > 1e-9:
        raise ConfigError(f"{who}: preference must be a probability vector")


def tag_name(topic: int, j: int) -> str:
    return f"topic{topic}_tag{j:03d}"


@dataclass
class GroundTruth:
    partition: dict[str, int]
    affiliations: dict[str, str | None]
    events: list[Event]
    realignments: list[Realignment]
    cutoff: date

    def write(self, path: str | Path) -> None:
        payload = {
            "partition": self.partition,
            "affiliations": self.affiliations,
            "events": [asdict(e) for e in self.events],
            "realignments": [asdict(r) for r in self.realignments],
            "cutoff": self.cutoff.isoformat(),
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path) -> GroundTruth:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(d["partition"], d["affiliations"], [Event(**e) for e in d["events"]],
                   [Realignment(**r) for r in d["realignments"]], date.fromisoformat(d["cutoff"]))


def _user_prefs(rng, base: np.ndarray, n: int, concentration: float | None) -> np.ndarray:
    if concentration is None:
        return np.tile(base, (n, 1))
    out = np.zeros((n, len(base)))
    support = base > 0
    if support.sum() == 1:
        out[:, support] = 1.0
    else:
        out[:, support] = rng.dirichlet(base[support] * concentration, size=n)
    return out


def generate(spec: SynthSpec, out_dir: str | Path) -> GroundTruth:
    """Write ``tweets.jsonl``, ``roster.csv``, ``follows.csv``, ``truth.json`` and ``spec.json``.

    Output is byte-identical for a given spec (including its seed).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    config = spec.capture_config()
    n_parties = len(spec.parties)
    pids = [p.party_id for p in spec.parties]

    users: list[str] = []
    party_of: list[int] = []
    for k, p in enumerate(spec.parties):
        users += [f"u{p.party_id}_{i:05d}" for i in range(p.n_users)]
        party_of += [k] * p.n_users
    users += [f"ux_{i:05d}" for i in range(spec.unaffiliated_users)]
    party_of += [-1] * spec.unaffiliated_users
    party_of_arr = np.array(party_of, dtype=np.int64)
    n_users = len(users)

    base = np.array([p.preference for p in spec.parties], dtype=np.float64)
    neutral = base.mean(axis=0)

    def party_prefs(profiles: np.ndarray) -> np.ndarray:
        prefs = np.zeros((n_users, spec.n_topics))
        for k in range(n_parties):
            members = party_of_arr == k
            prefs[members] = _user_prefs(rng, profiles[k], int(members.sum()), spec.user_concentration)
        none = party_of_arr < 0
        prefs[none] = _user_prefs(rng, neutral, int(none.sum()), spec.user_concentration)
        return prefs

    prefs = party_prefs(base)
    realign_on = {}
    for r in spec.realignments:
        realign_on.setdefault(r.day, []).append(r)

    candidates = {p: [f"cand_{p}_{j}" for j in range(spec.candidates_per_party)] for p in pids}
    roster = PartyRoster(Party(p.party_id, p.acronym or p.party_id, tuple(candidates[p.party_id]))
                         for p in spec.parties)

    follows: dict[str, set[str]] = {}
    truth_aff: dict[str, str | None] = {}
    rt_plan: list[tuple[int, str]] = []  # (user index, candidate)
    for i, name in enumerate(users):
        k = party_of[i]
        if k >= 0:
            own = candidates[pids[k]]
            truth_aff[name] = pids[k]
            if rng.random() < spec.follow_only_fraction:
                follows[name] = set(rng.choice(own, size=rng.integers(1, len(own) + 1), replace=False).tolist())
            else:
                n_rt = 1 + rng.poisson(max(spec.candidate_retweets - 1.0, 0.0))
                rt_plan += [(i, own[int(j)]) for j in rng.integers(0, len(own), size=n_rt)]
                follows[name] = {own[0]}
        else:
            truth_aff[name] = None
            a, b = rng.choice(n_parties, size=2, replace=False)
            if rng.random() < 0.5:
                rt_plan += [(i, candidates[pids[a]][0]), (i, candidates[pids[b]][0])]
            else:
                follows[name] = {candidates[pids[a]][0], candidates[pids[b]][0]}
    rt_days = rng.integers(0, spec.cutoff_day, size=len(rt_plan))

    vocab = np.array([[tag_name(t, j) for j in range(spec.hashtags_per_topic)] for t in range(spec.n_topics)])
    tweet_rate = spec.tweets_per_user_day
    tag_rate = tweet_rate * spec.tagged_fraction
    counter = 0
    with open(out / "tweets.jsonl", "w", encoding="utf-8") as fh:
        for day in range(spec.days):
            for r in realign_on.get(day, []):
                k = pids.index(r.party)
                members = party_of_arr == k
                prefs[members] = _user_prefs(rng, np.asarray(r.preference, dtype=np.float64),
                                             int(members.sum()), spec.user_concentration)
            n_plain = rng.poisson(tweet_rate * (1 - spec.tagged_fraction), size=n_users)
            n_tag = rng.poisson(tag_rate, size=n_users)
            t_user = np.repeat(np.arange(n_users), n_tag)
            cum = np.cumsum(prefs[t_user], axis=1)
            draw = rng.random(len(t_user))[:, None]
            t_topic = np.minimum((cum < draw).sum(axis=1), spec.n_topics - 1)
            extra_user, extra_topic = [], []
            for e in spec.events:
                if e.day <= day < e.day + e.duration:
                    members = np.flatnonzero(party_of_arr == pids.index(e.party))
                    n_extra = rng.poisson(tag_rate * (e.intensity - 1.0), size=len(members))
                    extra_user.append(np.repeat(members, n_extra))
                    extra_topic.append(np.full(int(n_extra.sum()), e.topic))
            if extra_user:
                t_user = np.concatenate([t_user] + extra_user)
                t_topic = np.concatenate([t_topic] + extra_topic)
            n_t = len(t_user)
            k_tags = rng.integers(1, spec.max_hashtags + 1, size=n_t)
            picks = np.argsort(rng.random((n_t, spec.hashtags_per_topic)), axis=1)[:, : spec.max_hashtags]
            noise = rng.random(n_t) < spec.cross_topic_rate
            noise_topic = (t_topic + rng.integers(1, max(spec.n_topics, 2), size=n_t)) % spec.n_topics
            noise_tag = rng.integers(0, spec.hashtags_per_topic, size=n_t)

            rows = []
            day_start = config.day_start_ts(spec.start + timedelta(days=day))
            for i in range(n_t):
                tags = vocab[t_topic[i], picks[i, : k_tags[i]]].tolist()
                if noise[i]:
                    tags.append(str(vocab[noise_topic[i], noise_tag[i]]))
                rows.append((int(t_user[i]), tags, None))
            p_user = np.repeat(np.arange(n_users), n_plain)
            rows += [(int(u), [], None) for u in p_user.tolist()]
            rows += [(u, [], cand) for (u, cand), d in zip(rt_plan, rt_days.tolist()) if d == day]
            offsets = rng.integers(0, 86400, size=len(rows))
            order = np.lexsort((np.arange(len(rows)), offsets))
            for j in order.tolist():
                u, tags, cand = rows[j]
                rec = {
                    "tweet_id": f"t{counter:09d}",
                    "user_id": users[u],
                    "timestamp": int(day_start + offsets[j]),
                    "hashtags": ["#" + t for t in tags],
                    "is_reply": False,
                    "is_retweet": cand is not None,
                    "is_quote": False,
                    "retweeted_user_id": cand,
                }
                counter += 1
                fh.write(json.dumps(rec))
                fh.write("\n")

    roster.write(out / "roster.csv")
    write_follows(follows, out / "follows.csv")
    partition = {tag_name(t, j): t for t in range(spec.n_topics) for j in range(spec.hashtags_per_topic)}
    truth = GroundTruth(partition, truth_aff, spec.events, spec.realignments, spec.cutoff)
    truth.write(out / "truth.json")
    (out / "spec.json").write_text(json.dumps(spec.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return truth
