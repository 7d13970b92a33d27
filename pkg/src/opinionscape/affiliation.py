"""Party affiliation from candidate retweets and follows."""

from __future__ import annotations

import csv
from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np

from .ingest import ConfigError, RecordStore, _as_date

DEFAULT_THRESHOLD = 0.75


@dataclass(frozen=True)
class Party:
    party_id: str
    acronym: str
    candidates: tuple[str, ...]
    name: str = ""


class PartyRoster:
    """Parties in a fixed order, with disjoint candidate account sets."""

    def __init__(self, parties: Iterable[Party]):
        self.parties = list(parties)
        if len(self.parties) < 2:
            raise ConfigError("roster needs at least two parties")
        self._by_candidate: dict[str, str] = {}
        ids = set()
        for p in self.parties:
            if p.party_id in ids:
                raise ConfigError(f"duplicate party id {p.party_id!r}")
            ids.add(p.party_id)
            for c in p.candidates:
                if c in self._by_candidate:
                    raise ConfigError(f"candidate {c!r} listed under two parties")
                self._by_candidate[c] = p.party_id

    @property
    def party_ids(self) -> list[str]:
        return [p.party_id for p in self.parties]

    def party_of(self, candidate: str) -> str | None:
        return self._by_candidate.get(candidate)

    def resolve(self, key: str) -> str:
        """Accept either a party id or an acronym."""
        for p in self.parties:
            if key in (p.party_id, p.acronym):
                return p.party_id
        raise KeyError(f"unknown party {key!r}")

    def acronym(self, party_id: str) -> str:
        for p in self.parties:
            if p.party_id == party_id:
                return p.acronym
        raise KeyError(party_id)

    @classmethod
    def read(cls, path: str | Path) -> PartyRoster:
        """CSV with columns party_id, acronym, candidates (space- or ';'-separated), optional name."""
        parties = []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                cands = tuple(c for c in row["candidates"].replace(";", " ").split() if c)
                parties.append(Party(row["party_id"].strip(), (row.get("acronym") or row["party_id"]).strip(),
                                     cands, (row.get("name") or "").strip()))
        return cls(parties)

    def write(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["party_id", "acronym", "name", "candidates"])
            for p in self.parties:
                w.writerow([p.party_id, p.acronym, p.name, " ".join(p.candidates)])


def read_follows(path: str | Path) -> dict[str, set[str]]:
    """Edge list ``user_id,candidate_id`` (header optional)."""
    follows: dict[str, set[str]] = defaultdict(set)
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if len(row) < 2 or row[0] == "user_id":
                continue
            follows[row[0].strip()].add(row[1].strip())
    return dict(follows)


def write_follows(follows: Mapping[str, Iterable[str]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "candidate_id"])
        for user in sorted(follows):
            for cand in sorted(follows[user]):
                w.writerow([user, cand])


@dataclass
class AffiliationResult:
    party: dict[str, str | None]
    retweets: dict[str, dict[str, int]] = field(default_factory=dict)
    followed: dict[str, frozenset[str]] = field(default_factory=dict)
    cutoff: date | None = None
    party_ids: list[str] = field(default_factory=list)

    def members(self, party_id: str) -> list[str]:
        return sorted(u for u, p in self.party.items() if p == party_id)

    def affiliated(self) -> dict[str, str]:
        return {u: p for u, p in self.party.items() if p is not None}

    def sizes(self) -> dict[str, int]:
        counts = dict.fromkeys(self.party_ids, 0)
        for p in self.party.values():
            if p is not None:
                counts[p] = counts.get(p, 0) + 1
        return counts

    def write(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user_id", "party_id"] + [f"rt_{p}" for p in self.party_ids] + ["followed"])
            for user in sorted(self.party):
                rts = self.retweets.get(user, {})
                w.writerow([user, self.party[user] or "none"]
                           + [rts.get(p, 0) for p in self.party_ids]
                           + [" ".join(sorted(self.followed.get(user, ())))])

    @classmethod
    def read(cls, path: str | Path) -> AffiliationResult:
        party: dict[str, str | None] = {}
        retweets: dict[str, dict[str, int]] = {}
        followed: dict[str, frozenset[str]] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            party_ids = [c[3:] for c in reader.fieldnames or [] if c.startswith("rt_")]
            for row in reader:
                user = row["user_id"]
                party[user] = None if row["party_id"] == "none" else row["party_id"]
                counts = {p: int(row[f"rt_{p}"]) for p in party_ids if int(row[f"rt_{p}"])}
                if counts:
                    retweets[user] = counts
                if row.get("followed"):
                    followed[user] = frozenset(row["followed"].split())
        return cls(party, retweets, followed, None, party_ids)


def decide(retweets: Mapping[str, int], followed: Iterable[str], threshold: float) -> str | None:
    """Decision rule for a single user's evidence."""
    total = sum(retweets.values())
    if total > 0:
        winners = [p for p, c in retweets.items() if c / total >= threshold]
        assert len(winners) <= 1, "two parties at threshold > 0.5"
        return winners[0] if winners else None
    parties = set(followed)
    if len(parties) == 1:
        return next(iter(parties))
    return None


def infer_affiliations(records: RecordStore, follows: Mapping[str, Iterable[str]],
                       roster: PartyRoster, cutoff: date | str,
                       threshold: float = DEFAULT_THRESHOLD) -> AffiliationResult:
    """Assign each user at most one party using evidence dated before ``cutoff``.

    Every retweet event of a candidate counts (simple or quote; repeated
    retweets of one tweet are not deduplicated). Users in the stream or in
    ``follows`` appear in the result; those failing both rules map to None.
    """
    if not 0.5 < threshold <= 1.0:
        raise ConfigError("threshold must lie in (0.5, 1]")
    cutoff = _as_date(cutoff)
    cutoff_ts = records.config.day_start_ts(cutoff)
    pids = roster.party_ids
    users = records.interns.users

    cand_party = np.full(max(len(users), 1), -1, dtype=np.int64)
    for i, name in enumerate(users):
        p = roster.party_of(name)
        if p is not None:
            cand_party[i] = pids.index(p)

    rt = records.retweeted
    mask = (records.ts < cutoff_ts) & (rt >= 0)
    mask[mask] = cand_party[rt[mask]] >= 0
    author = records.user[mask].astype(np.int64)
    party_idx = cand_party[rt[mask]]
    key = author * len(pids) + party_idx
    uniq, counts = np.unique(key, return_counts=True)
    retweets: dict[str, dict[str, int]] = {}
    for k, c in zip(uniq.tolist(), counts.tolist()):
        retweets.setdefault(users[k // len(pids)], {})[pids[k % len(pids)]] = c

    followed: dict[str, frozenset[str]] = {}
    for user, cands in follows.items():
        parties = frozenset(p for p in (roster.party_of(c) for c in cands) if p is not None)
        if parties:
            followed[user] = parties

    authors = {users[int(u)] for u in np.unique(records.user)}
    everyone = authors | set(follows) | set(retweets)
    party = {u: decide(retweets.get(u, {}), followed.get(u, ()), threshold) for u in sorted(everyone)}
    return AffiliationResult(party, retweets, followed, cutoff, pids)
