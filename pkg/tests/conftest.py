from __future__ import annotations

from datetime import date

import pytest

from opinionscape.ingest import CaptureConfig, RecordStore, TweetRecord

START = date(2019, 1, 1)


@pytest.fixture
def config() -> CaptureConfig:
    return CaptureConfig(START, date(2019, 1, 31), window_days=7, activity_probe_days=30, utc_offset_hours=-3.0)


def at(config: CaptureConfig, day: int, seconds: int = 3600) -> int:
    """Epoch seconds ``seconds`` after local midnight of capture day ``day``."""
    return config.day_start_ts(config.date_of(day)) + seconds


class Tweets:
    """Tiny builder for in-memory record lists."""

    def __init__(self, config: CaptureConfig):
        self.config = config
        self.records: list[TweetRecord] = []

    def add(self, user: str, tags=(), day: int = 0, **flags) -> Tweets:
        n = len(self.records)
        self.records.append(TweetRecord(f"t{n:06d}", user, at(self.config, day, 3600 + n), tuple(tags), **flags))
        return self

    def store(self) -> RecordStore:
        return RecordStore.from_records(self.records, self.config)


@pytest.fixture
def tweets(config) -> Tweets:
    return Tweets(config)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
