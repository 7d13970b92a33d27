"""Tweet stream parsing, normalization, classification and the activity filter."""

from __future__ import annotations

import enum
import json
import logging
import re
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

HASHTAG_IN_TEXT = re.compile(r"#(\w+)")
NORMALIZED_TAG = re.compile(r"[^\s#]\S*")

FLAG_REPLY = 1
FLAG_RETWEET = 2
FLAG_QUOTE = 4

MAX_MALFORMED_FRACTION = 0.5


class ConfigError(ValueError):
    pass


class FormatError(ValueError):
    """Raised when most of an input file does not match the record format."""


class TweetClass(str, enum.Enum):
    REPLY = "reply"
    SIMPLE_RETWEET = "simple_retweet"
    QUOTE_RETWEET = "quote_retweet"
    ORIGINAL = "original"


@dataclass(frozen=True)
class CaptureConfig:
    """Capture interval and windowing parameters.

    ``capture_end`` is inclusive. Calendar days are resolved at a fixed
    ``utc_offset_hours`` (Argentina is UTC-3).
    """

    capture_start: date
    capture_end: date
    window_days: int = 7
    activity_probe_days: int = 30
    utc_offset_hours: float = -3.0

    def __post_init__(self):
        if not self.capture_start < self.capture_end:
            raise ConfigError("capture_start must precede capture_end")
        if self.window_days < 1:
            raise ConfigError("window_days must be >= 1")
        if self.activity_probe_days < 0:
            raise ConfigError("activity_probe_days must be >= 0")

    @property
    def tz(self) -> timezone:
        return timezone(timedelta(hours=self.utc_offset_hours))

    def day_start_ts(self, day: date) -> int:
        return int(datetime.combine(day, time(0), tzinfo=self.tz).timestamp())

    @property
    def start_ts(self) -> int:
        return self.day_start_ts(self.capture_start)

    @property
    def end_ts(self) -> int:
        """Exclusive upper bound: local midnight after ``capture_end``."""
        return self.day_start_ts(self.capture_end + timedelta(days=1))

    @property
    def n_days(self) -> int:
        return (self.capture_end - self.capture_start).days + 1

    def day_index(self, ts):
        """Local calendar-day offset from ``capture_start`` (vectorized)."""
        return (np.asarray(ts, dtype=np.int64) - self.start_ts) // 86400

    def date_of(self, day_index: int) -> date:
        return self.capture_start + timedelta(days=int(day_index))

    def to_dict(self) -> dict:
        return {
            "capture_start": self.capture_start.isoformat(),
            "capture_end": self.capture_end.isoformat(),
            "window_days": self.window_days,
            "activity_probe_days": self.activity_probe_days,
            "utc_offset_hours": self.utc_offset_hours,
        }

    @classmethod
    def from_dict(cls, d: dict) -> CaptureConfig:
        return cls(
            capture_start=_as_date(d["capture_start"]),
            capture_end=_as_date(d["capture_end"]),
            window_days=int(d.get("window_days", 7)),
            activity_probe_days=int(d.get("activity_probe_days", 30)),
            utc_offset_hours=float(d.get("utc_offset_hours", -3.0)),
        )


def _as_date(value) -> date:
    if isinstance(value, datetime):
        return value.date()
    if isinstance(value, date):
        return value
    return date.fromisoformat(str(value))


@dataclass(frozen=True)
class TweetRecord:
    tweet_id: str
    user_id: str
    timestamp: int
    hashtags: tuple[str, ...] = ()
    is_reply: bool = False
    is_retweet: bool = False
    is_quote: bool = False
    retweeted_user_id: str | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "tweet_id": self.tweet_id,
                "user_id": self.user_id,
                "timestamp": self.timestamp,
                "hashtags": list(self.hashtags),
                "is_reply": self.is_reply,
                "is_retweet": self.is_retweet,
                "is_quote": self.is_quote,
                "retweeted_user_id": self.retweeted_user_id,
            },
            ensure_ascii=False,
        )


def classify_tweet(record: TweetRecord) -> TweetClass:
    """Precedence: reply > simple retweet > quote retweet > original."""
    if record.is_reply:
        return TweetClass.REPLY
    if record.is_retweet:
        return TweetClass.SIMPLE_RETWEET
    if record.is_quote:
        return TweetClass.QUOTE_RETWEET
    return TweetClass.ORIGINAL


def normalize_hashtag(tag: str) -> str | None:
    """Case-fold and strip leading '#'. Returns None when nothing valid is left."""
    tag = tag.strip().lstrip("#").casefold().strip()
    if not tag or not NORMALIZED_TAG.fullmatch(tag):
        return None
    return tag


def normalize_hashtags(tags: Iterable[str]) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for raw in tags:
        tag = normalize_hashtag(raw)
        if tag is not None:
            seen.setdefault(tag, None)
    return tuple(seen)


def parse_timestamp(value) -> int:
    if isinstance(value, bool):
        raise ValueError("boolean timestamp")
    if isinstance(value, (int, float)):
        return int(value)
    text = str(value).strip()
    try:
        return int(float(text))
    except ValueError:
        pass
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


class Interner:
    """Dense integer ids for strings, assigned in first-seen order."""

    def __init__(self, items: Iterable[str] = ()):
        self._ids: dict[str, int] = {}
        self._items: list[str] = []
        for item in items:
            self.add(item)

    def add(self, item: str) -> int:
        idx = self._ids.get(item)
        if idx is None:
            idx = len(self._items)
            self._ids[item] = idx
            self._items.append(item)
        return idx

    def get(self, item: str, default: int = -1) -> int:
        return self._ids.get(item, default)

    def __getitem__(self, idx: int) -> str:
        return self._items[idx]

    def __contains__(self, item: str) -> bool:
        return item in self._ids

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[str]:
        return iter(self._items)

    @property
    def items(self) -> list[str]:
        return self._items


@dataclass
class InternTable:
    users: Interner = field(default_factory=Interner)
    hashtags: Interner = field(default_factory=Interner)


@dataclass
class ParseStats:
    lines: int = 0
    malformed: int = 0
    out_of_range: int = 0
    duplicates: int = 0
    not_allowed: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class RecordStore(Sequence):
    """Columnar, timestamp-ordered, immutable tweet collection.

    Indexing yields ``TweetRecord`` objects; the hot paths read the arrays
    directly: ``user`` and ``retweeted`` index ``interns.users`` (-1 for no
    retweet source), ``tag_ptr``/``tag_idx`` is a CSR layout over
    ``interns.hashtags``, ``flags`` packs the reply/retweet/quote bits.
    """

    def __init__(self, tweet_ids, user, ts, tag_ptr, tag_idx, flags, retweeted,
                 interns: InternTable, config: CaptureConfig, stats: ParseStats | None = None):
        self.tweet_ids = list(tweet_ids)
        self.user = np.ascontiguousarray(user, dtype=np.int32)
        self.ts = np.ascontiguousarray(ts, dtype=np.int64)
        self.tag_ptr = np.ascontiguousarray(tag_ptr, dtype=np.int64)
        self.tag_idx = np.ascontiguousarray(tag_idx, dtype=np.int32)
        self.flags = np.ascontiguousarray(flags, dtype=np.uint8)
        self.retweeted = np.ascontiguousarray(retweeted, dtype=np.int32)
        self.interns = interns
        self.config = config
        self.stats = stats or ParseStats()
        for arr in (self.user, self.ts, self.tag_ptr, self.tag_idx, self.flags, self.retweeted):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.tweet_ids)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        tags = self.tag_idx[self.tag_ptr[i] : self.tag_ptr[i + 1]]
        f = int(self.flags[i])
        rt = int(self.retweeted[i])
        return TweetRecord(
            tweet_id=self.tweet_ids[i],
            user_id=self.interns.users[int(self.user[i])],
            timestamp=int(self.ts[i]),
            hashtags=tuple(self.interns.hashtags[int(t)] for t in tags),
            is_reply=bool(f & FLAG_REPLY),
            is_retweet=bool(f & FLAG_RETWEET),
            is_quote=bool(f & FLAG_QUOTE),
            retweeted_user_id=self.interns.users[rt] if rt >= 0 else None,
        )

    @property
    def n_users(self) -> int:
        return len(self.interns.users)

    @property
    def n_hashtags(self) -> int:
        return len(self.interns.hashtags)

    def tag_owner_rows(self) -> np.ndarray:
        """Record index for each entry of ``tag_idx``."""
        return np.repeat(np.arange(len(self), dtype=np.int64), np.diff(self.tag_ptr))

    def day_index(self) -> np.ndarray:
        return self.config.day_index(self.ts)

    def class_counts(self) -> dict[TweetClass, int]:
        f = self.flags
        reply = (f & FLAG_REPLY) != 0
        rt = ~reply & ((f & FLAG_RETWEET) != 0)
        quote = ~reply & ~rt & ((f & FLAG_QUOTE) != 0)
        return {
            TweetClass.REPLY: int(reply.sum()),
            TweetClass.SIMPLE_RETWEET: int(rt.sum()),
            TweetClass.QUOTE_RETWEET: int(quote.sum()),
            TweetClass.ORIGINAL: int(len(f) - reply.sum() - rt.sum() - quote.sum()),
        }

    @classmethod
    def from_records(cls, records: Iterable[TweetRecord], config: CaptureConfig) -> RecordStore:
        """Build a store from in-memory records (normalizing, filtering and sorting)."""
        builder = _Builder(config)
        for rec in records:
            builder.add(rec.tweet_id, rec.user_id, rec.timestamp, normalize_hashtags(rec.hashtags),
                        rec.is_reply, rec.is_retweet, rec.is_quote, rec.retweeted_user_id)
        return builder.finish()

    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name in ("user", "ts", "tag_ptr", "tag_idx", "flags", "retweeted"):
            np.save(d / f"{name}.npy", getattr(self, name))
        meta = {
            "config": self.config.to_dict(),
            "stats": self.stats.to_dict(),
            "users": self.interns.users.items,
            "hashtags": self.interns.hashtags.items,
            "tweet_ids": self.tweet_ids,
        }
        (d / "meta.json").write_text(json.dumps(meta, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, directory: str | Path) -> RecordStore:
        d = Path(directory)
        meta = json.loads((d / "meta.json").read_text(encoding="utf-8"))
        arrays = {name: np.load(d / f"{name}.npy") for name in
                  ("user", "ts", "tag_ptr", "tag_idx", "flags", "retweeted")}
        interns = InternTable(Interner(meta["users"]), Interner(meta["hashtags"]))
        return cls(meta["tweet_ids"], interns=interns, config=CaptureConfig.from_dict(meta["config"]),
                   stats=ParseStats(**meta["stats"]), **arrays)


class _Builder:
    def __init__(self, config: CaptureConfig, allowed_users: set[str] | None = None):
        self.config = config
        self.allowed = allowed_users
        self.lo = config.start_ts
        self.hi = config.end_ts
        self.stats = ParseStats()
        self.users = Interner()
        self.tags = Interner()
        self.tweet_ids: list[str] = []
        self.user: list[int] = []
        self.ts: list[int] = []
        self.lengths: list[int] = []
        self.tag_idx: list[int] = []
        self.flags: list[int] = []
        self.retweeted: list[int] = []

    def add(self, tweet_id, user_id, ts, hashtags, is_reply, is_retweet, is_quote, rt_user):
        if not self.lo <= ts < self.hi:
            self.stats.out_of_range += 1
            return
        if self.allowed is not None and user_id not in self.allowed:
            self.stats.not_allowed += 1
            return
        self.tweet_ids.append(tweet_id)
        self.user.append(self.users.add(user_id))
        self.ts.append(ts)
        self.lengths.append(len(hashtags))
        add_tag = self.tags.add
        self.tag_idx.extend([add_tag(t) for t in hashtags])
        self.flags.append((FLAG_REPLY if is_reply else 0) | (FLAG_RETWEET if is_retweet else 0)
                          | (FLAG_QUOTE if is_quote else 0))
        self.retweeted.append(self.users.add(rt_user) if rt_user is not None else -1)

    def finish(self) -> RecordStore:
        n = len(self.tweet_ids)
        last: dict[str, int] = {}
        for i, tid in enumerate(self.tweet_ids):
            last[tid] = i
        keep = np.fromiter(sorted(last.values()), dtype=np.int64, count=len(last))
        self.stats.duplicates = n - len(keep)

        ts = np.array(self.ts, dtype=np.int64)[keep]
        order = keep[np.argsort(ts, kind="stable")]
        lengths = np.array(self.lengths, dtype=np.int64)
        starts = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(lengths, out=starts[1:])
        all_tags = np.array(self.tag_idx, dtype=np.int64)

        new_lengths = lengths[order]
        tag_ptr = np.zeros(len(order) + 1, dtype=np.int64)
        np.cumsum(new_lengths, out=tag_ptr[1:])
        gather = np.repeat(starts[order] - tag_ptr[:-1], new_lengths) + np.arange(tag_ptr[-1])
        tag_idx = all_tags[gather]

        user = np.array(self.user, dtype=np.int64)[order]
        retweeted = np.array(self.retweeted, dtype=np.int64)[order]

        # Re-intern so ids are dense over the surviving records, in stream order.
        user_map, users = _compact(np.concatenate([user, retweeted[retweeted >= 0]]),
                                   len(self.users), self.users)
        tag_map, tags = _compact(tag_idx, len(self.tags), self.tags)
        rt_new = np.where(retweeted >= 0, user_map[np.maximum(retweeted, 0)], -1)
        return RecordStore(
            [self.tweet_ids[i] for i in order],
            user_map[user],
            np.array(self.ts, dtype=np.int64)[order],
            tag_ptr,
            tag_map[tag_idx] if len(tag_idx) else tag_idx,
            np.array(self.flags, dtype=np.uint8)[order],
            rt_new,
            InternTable(users, tags),
            self.config,
            self.stats,
        )


def _compact(ids: np.ndarray, size: int, interner: Interner) -> tuple[np.ndarray, Interner]:
    mapping = np.full(size, -1, dtype=np.int64)
    if len(ids) == 0:
        return mapping, Interner()
    uniq, first = np.unique(ids, return_index=True)
    ordered = uniq[np.argsort(first, kind="stable")]
    mapping[ordered] = np.arange(len(ordered))
    return mapping, Interner(interner[int(i)] for i in ordered)


def _parse_line(line: str):
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    tweet_id = obj["tweet_id"]
    user_id = obj["user_id"]
    if tweet_id is None or user_id is None:
        raise ValueError("missing id")
    ts = parse_timestamp(obj["timestamp"])
    raw = obj.get("hashtags")
    if raw is None:
        raw = HASHTAG_IN_TEXT.findall(obj.get("text") or "")
    elif not isinstance(raw, list) or not all(isinstance(t, str) for t in raw):
        raise ValueError("hashtags must be a list of strings")
    rt = obj.get("retweeted_user_id")
    return (
        str(tweet_id),
        str(user_id),
        ts,
        normalize_hashtags(raw),
        bool(obj.get("is_reply", False)),
        bool(obj.get("is_retweet", False)),
        bool(obj.get("is_quote", False)),
        None if rt is None or rt == "" else str(rt),
    )


def parse_stream(path: str | Path, config: CaptureConfig,
                 allowed_users: Iterable[str] | None = None) -> RecordStore:
    """Parse a line-delimited JSON tweet file into a ``RecordStore``.

    Malformed lines are counted and skipped; records outside the capture
    interval are dropped; duplicate ``tweet_id`` keeps the last occurrence.
    Raises ``FormatError`` when more than half the non-blank lines are malformed.
    """
    builder = _Builder(config, set(allowed_users) if allowed_users is not None else None)
    stats = builder.stats
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            stats.lines += 1
            try:
                fields = _parse_line(line)
            except (ValueError, KeyError, TypeError, OverflowError):
                stats.malformed += 1
                continue
            builder.add(*fields)
    if stats.lines and stats.malformed > MAX_MALFORMED_FRACTION * stats.lines:
        raise FormatError(
            f"{path}: {stats.malformed} of {stats.lines} lines malformed; wrong input schema?"
        )
    store = builder.finish()
    log.info("parsed %d records (%d malformed, %d out of range, %d duplicates)",
             len(store), stats.malformed, stats.out_of_range, stats.duplicates)
    return store


def active_users(records: RecordStore, config: CaptureConfig | None = None) -> set[str]:
    """Users with at least one record in the first ``activity_probe_days`` of capture.

    Every tweet counts, tagged or not.
    """
    config = config or records.config
    if len(records) == 0:
        return set()
    lo = config.start_ts
    hi = lo + 86400 * config.activity_probe_days
    mask = (records.ts >= lo) & (records.ts < hi)
    return {records.interns.users[int(u)] for u in np.unique(records.user[mask])}


def write_records(records: Iterable[TweetRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json())
            fh.write("\n")
