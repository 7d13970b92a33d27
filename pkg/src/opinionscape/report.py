"""Plot-ready exports: topic usage curves, similarity series, k-core tables."""

from __future__ import annotations

import csv
import io
from collections.abc import Sequence
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from .affiliation import AffiliationResult
from .ingest import RecordStore
from .similarity import SimilaritySeries
from .topics import CorenessMap, TopicPartition

ROLLING_DAYS = 7
MODES = ("rolling", "cumulative", "daily")


@dataclass
class TopicUsageSeries:
    topic: int
    party: str
    dates: list[date]
    daily: np.ndarray
    rolling: np.ndarray
    cumulative: np.ndarray

    def values(self, mode: str) -> np.ndarray:
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        return getattr(self, mode)


def trailing_mean(x: np.ndarray, width: int = ROLLING_DAYS) -> np.ndarray:
    """Mean over the trailing ``width`` days; the first days average what exists."""
    x = np.asarray(x, dtype=np.float64)
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, len(x) + 1)
    lo = np.maximum(idx - width, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def party_topic_daily(records: RecordStore, partition: TopicPartition,
                      affiliations: AffiliationResult) -> tuple[list[str], np.ndarray]:
    """Usage counts indexed [party, topic, day] among affiliated users."""
    pids = list(affiliations.party_ids)
    config = records.config
    party_of_user = np.full(records.n_users, -1, dtype=np.int64)
    for name, p in affiliations.affiliated().items():
        i = records.interns.users.get(name)
        if i >= 0:
            party_of_user[i] = pids.index(p)
    owner = records.tag_owner_rows()
    party = party_of_user[records.user[owner]]
    topic = partition.lookup(records.interns.hashtags.items)[records.tag_idx] if len(records.tag_idx) \
        else np.zeros(0, dtype=np.int64)
    day = config.day_index(records.ts)[owner]
    ok = (party >= 0) & (topic >= 0) & (day >= 0) & (day < config.n_days)
    out = np.zeros((len(pids), max(partition.n_topics, 1), config.n_days), dtype=np.int64)
    np.add.at(out, (party[ok], topic[ok], day[ok]), 1)
    return pids, out


def topic_usage(records: RecordStore, partition: TopicPartition, affiliations: AffiliationResult,
                topic: int, mode: str = "rolling", window: int = ROLLING_DAYS) -> list[TopicUsageSeries]:
    """Daily usage of one topic by each party's supporters, with trailing mean and running total.

    ``mode`` is validated here; every returned series carries all three views.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    partition.check_topic(topic)
    pids, cube = party_topic_daily(records, partition, affiliations)
    config = records.config
    dates = [config.date_of(d) for d in range(config.n_days)]
    out = []
    for k, p in enumerate(pids):
        daily = cube[k, topic]
        out.append(TopicUsageSeries(topic, p, dates, daily, trailing_mean(daily, window), np.cumsum(daily)))
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def usage_csv(series: Sequence[TopicUsageSeries]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date", "topic", "party", "daily", "rolling", "cumulative"])
    for s in series:
        for i, d in enumerate(s.dates):
            w.writerow([d.isoformat(), s.topic, s.party, int(s.daily[i]), _fmt(s.rolling[i]), int(s.cumulative[i])])
    return buf.getvalue()


def similarity_wide_csv(series: Sequence[SimilaritySeries]) -> str:
    """One row per date, one column per series; gap dates leave the cell empty."""
    dates = sorted({d for s in series for d in s.dates})
    lookup = [dict(zip(s.dates, s.values)) for s in series]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date"] + [s.label for s in series])
    for d in dates:
        w.writerow([d.isoformat()] + [_fmt(m[d]) if d in m else "" for m in lookup])
    return buf.getvalue()


def similarity_long_csv(series: Sequence[SimilaritySeries]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date", "kind", "group_a", "group_b", "value", "n_a", "n_b"])
    rows = []
    for s in series:
        for d, v, na, nb in zip(s.dates, s.values, s.n_a, s.n_b):
            rows.append([d.isoformat(), s.kind, s.group_a, s.group_b, _fmt(v), na, nb])
    rows.sort(key=lambda r: tuple(r[:4]))
    w.writerows(rows)
    return buf.getvalue()


def coreness_csv(cmap: CorenessMap) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tag", "topic", "degree", "coreness"])
    for t, d, c in cmap.rows():
        w.writerow([t, cmap.topic, d, c])
    return buf.getvalue()


PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]
WIDTH, HEIGHT, PAD = 720, 360, 40


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def line_chart_svg(named: Sequence[tuple[str, Sequence[date], Sequence[float]]], title: str = "") -> str:
    """Minimal deterministic line chart; gaps in a series split its polyline."""
    all_dates = sorted({d for _, ds, _ in named for d in ds})
    vals = [v for _, _, vs in named for v in vs]
    if not all_dates or not vals:
        raise ValueError("nothing to plot")
    d0 = all_dates[0].toordinal()
    span = max(all_dates[-1].toordinal() - d0, 1)
    lo, hi = min(vals), max(vals)
    if hi == lo:
        hi, lo = hi + 0.5, lo - 0.5

    def xy(d: date, v: float) -> str:
        x = PAD + (WIDTH - 2 * PAD) * (d.toordinal() - d0) / span
        y = HEIGHT - PAD - (HEIGHT - 2 * PAD) * (v - lo) / (hi - lo)
        return f"{x:.2f},{y:.2f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{PAD}" y="{PAD // 2}" font-size="12">{_escape(title)}</text>',
           f'<text x="4" y="{PAD}" font-size="10">{hi:.4g}</text>',
           f'<text x="4" y="{HEIGHT - PAD}" font-size="10">{lo:.4g}</text>',
           f'<text x="{PAD}" y="{HEIGHT - 8}" font-size="10">{all_dates[0].isoformat()}</text>',
           f'<text x="{WIDTH - PAD - 60}" y="{HEIGHT - 8}" font-size="10">{all_dates[-1].isoformat()}</text>']
    for k, (name, ds, vs) in enumerate(named):
        color = PALETTE[k % len(PALETTE)]
        run: list[str] = []
        prev = None
        segments = []
        for d, v in zip(ds, vs):
            if prev is not None and d.toordinal() - prev > 1:
                segments.append(run)
                run = []
            run.append(xy(d, v))
            prev = d.toordinal()
        segments.append(run)
        for seg in segments:
            if seg:
                out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(seg)}"/>')
        out.append(f'<text x="{WIDTH - PAD - 140}" y="{PAD + 14 * k}" font-size="10" fill="{color}">'
                   f"{_escape(name)}</text>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def coreness_svg(cmap: CorenessMap) -> str:
    """Degree (x) against coreness (y) scatter, one dot per hashtag."""
    if not cmap.tags:
        raise ValueError("nothing to plot")
    dmax = max(int(cmap.degree.max()), 1)
    cmax = max(int(cmap.coreness.max()), 1)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{PAD}" y="{PAD // 2}" font-size="12">topic {cmap.topic}: degree vs coreness</text>']
    for tag, d, c in cmap.rows():
        x = PAD + (WIDTH - 2 * PAD) * d / dmax
        y = HEIGHT - PAD - (HEIGHT - 2 * PAD) * c / cmax
        color = PALETTE[c % len(PALETTE)]
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{color}"><title>{_escape(tag)}</title></circle>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render(obj, fmt: str, path: str | Path | None = None, mode: str = "rolling") -> str:
    """Render usage series, similarity series or a coreness map as csv or svg.

    Returns the text and writes it to ``path`` when given.
    """
    if fmt not in ("csv", "svg"):
        raise ValueError(f"unknown format {fmt!r}")
    if isinstance(obj, CorenessMap):
        text = coreness_csv(obj) if fmt == "csv" else coreness_svg(obj)
    else:
        items = list(obj)
        if not items:
            raise ValueError("nothing to render")
        if isinstance(items[0], TopicUsageSeries):
            if fmt == "csv":
                text = usage_csv(items)
            else:
                text = line_chart_svg([(s.party, s.dates, s.values(mode).tolist()) for s in items],
                                      f"topic {items[0].topic} ({mode})")
        elif isinstance(items[0], SimilaritySeries):
            if fmt == "csv":
                text = similarity_wide_csv(items)
            else:
                text = line_chart_svg([(s.label, s.dates, s.values) for s in items], "similarity")
        else:
            raise TypeError(f"cannot render {type(items[0]).__name__}")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
