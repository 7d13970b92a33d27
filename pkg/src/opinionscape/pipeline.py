"""End-to-end staged run with content-hashed, reusable stage artifacts."""

from __future__ import annotations

import hashlib
import json
import logging
import shutil
from dataclasses import asdict, dataclass, field, fields
from datetime import date
from pathlib import Path

import yaml

from . import dynamics, report, similarity, topics
from .affiliation import DEFAULT_THRESHOLD, AffiliationResult, PartyRoster, infer_affiliations, read_follows
from .ingest import CaptureConfig, ConfigError, RecordStore, _as_date, parse_stream
from .semantic_graph import DEFAULT_KL_THRESHOLD, DEFAULT_MIN_WEIGHT, CooccurrenceGraph, build_graph, political_scores

log = logging.getLogger(__name__)

STAGES = ("ingest", "affiliate", "graph", "topics", "dynamics", "similarity", "report")
ARTIFACT_VERSION = 1
MAX_REPORT_TOPICS = 20


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage


@dataclass
class RunConfig:
    tweets: Path
    roster: Path
    follows: Path
    out: Path
    capture_start: date
    capture_end: date
    cutoff: date | None = None
    probe_days: int = 30
    window_days: int = 7
    utc_offset_hours: float = -3.0
    allow_list: Path | None = None
    affiliation_threshold: float = DEFAULT_THRESHOLD
    min_weight: int = DEFAULT_MIN_WEIGHT
    kl_threshold: float = DEFAULT_KL_THRESHOLD
    political_only: bool = False
    detector: str = "default"
    communities: Path | None = None
    seed: int = 0
    resolution: float = 1.0
    reference: str = "users"
    similarity_self: str = "all"
    similarity_cross: str = "all"
    report_topics: list[int] | None = None
    dump_vectors: bool = False

    def __post_init__(self):
        for name in ("tweets", "roster", "follows", "out", "allow_list", "communities"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, Path(v))
        self.capture_start = _as_date(self.capture_start)
        self.capture_end = _as_date(self.capture_end)
        if self.cutoff is not None:
            self.cutoff = _as_date(self.cutoff)
        self.validate()

    def validate(self) -> None:
        self.capture()
        if not 0.5 < self.affiliation_threshold <= 1.0:
            raise ConfigError("affiliation_threshold must lie in (0.5, 1]")
        if self.min_weight < 1:
            raise ConfigError("min_weight must be >= 1")
        if self.kl_threshold < 0:
            raise ConfigError("kl_threshold must be >= 0")
        if self.detector not in ("default", "external"):
            raise ConfigError(f"unknown detector {self.detector!r}")
        if self.detector == "external" and self.communities is None:
            raise ConfigError("external detector needs 'communities'")
        if self.reference not in dynamics.REFERENCES:
            raise ConfigError(f"reference must be one of {dynamics.REFERENCES}")
        if self.cutoff is not None and not self.capture_start < self.cutoff <= self.capture_end:
            raise ConfigError("cutoff must fall inside the capture")

    def capture(self) -> CaptureConfig:
        return CaptureConfig(self.capture_start, self.capture_end, self.window_days,
                             self.probe_days, self.utc_offset_hours)

    @property
    def affiliation_cutoff(self) -> date:
        return self.cutoff or self.capture_end

    @classmethod
    def from_file(cls, path: str | Path) -> RunConfig:
        """YAML or JSON; relative paths resolve against the file's directory."""
        path = Path(path)
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("tweets", "roster", "follows", "out", "allow_list", "communities"):
            if raw.get(key) is not None and not Path(raw[key]).is_absolute():
                raw[key] = path.parent / raw[key]
        return cls(**raw)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: (str(v) if isinstance(v, (Path, date)) else v) for k, v in d.items()}


def file_hash(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def tree_hash(directory: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(directory.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            h.update(p.relative_to(directory).as_posix().encode())
            h.update(file_hash(p).encode())
    return h.hexdigest()


@dataclass
class _Stage:
    name: str
    params: dict
    inputs: dict = field(default_factory=dict)

    def key(self) -> str:
        payload = {"stage": self.name, "version": ARTIFACT_VERSION, "params": self.params, "inputs": self.inputs}
        return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


class Pipeline:
    def __init__(self, config: RunConfig, force: bool = False):
        self.cfg = config
        self.force = force
        self.out = Path(config.out)
        self.outputs: dict[str, str] = {}
        self.status: dict[str, str] = {}

    def stage_dir(self, name: str) -> Path:
        return self.out / name

    def _fresh(self, stage: _Stage) -> bool:
        manifest = self.stage_dir(stage.name) / "manifest.json"
        if self.force or not manifest.exists():
            return False
        m = json.loads(manifest.read_text(encoding="utf-8"))
        return m.get("input_key") == stage.key() and m.get("output_hash") == tree_hash(self.stage_dir(stage.name))

    def _run(self, stage: _Stage, body) -> None:
        d = self.stage_dir(stage.name)
        if self._fresh(stage):
            self.status[stage.name] = "cached"
        else:
            if d.exists():
                shutil.rmtree(d)
            d.mkdir(parents=True)
            try:
                body(d)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(stage.name, f"{type(exc).__name__}: {exc}") from exc
            manifest = {"stage": stage.name, "input_key": stage.key(), "output_hash": tree_hash(d),
                        "params": stage.params, "inputs": stage.inputs}
            (d / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True, default=str) + "\n",
                                             encoding="utf-8")
            self.status[stage.name] = "ran"
        self.outputs[stage.name] = tree_hash(d)
        log.info("stage %s: %s", stage.name, self.status[stage.name])

    def _require(self, stage: str, *paths: Path | None) -> None:
        for p in paths:
            if p is None or not Path(p).exists():
                raise StageError(stage, f"missing input {p}")

    def run(self) -> dict[str, str]:
        cfg = self.cfg
        self.out.mkdir(parents=True, exist_ok=True)

        self._require("ingest", cfg.tweets)
        if cfg.allow_list is not None:
            self._require("ingest", cfg.allow_list)
        ingest_inputs = {"tweets": file_hash(cfg.tweets)}
        if cfg.allow_list is not None:
            ingest_inputs["allow_list"] = file_hash(cfg.allow_list)
        self._run(_Stage("ingest", cfg.capture().to_dict(), ingest_inputs), self._ingest)

        self._require("affiliate", cfg.roster, cfg.follows)
        self._run(_Stage("affiliate",
                         {"cutoff": cfg.affiliation_cutoff.isoformat(), "threshold": cfg.affiliation_threshold},
                         {"ingest": self.outputs["ingest"], "roster": file_hash(cfg.roster),
                          "follows": file_hash(cfg.follows)}), self._affiliate)

        self._run(_Stage("graph", {"min_weight": cfg.min_weight, "kl_threshold": cfg.kl_threshold,
                                   "political_only": cfg.political_only},
                         {"ingest": self.outputs["ingest"], "affiliate": self.outputs["affiliate"]}), self._graph)

        topic_inputs = {"graph": self.outputs["graph"]}
        if cfg.detector == "external":
            self._require("topics", cfg.communities)
            topic_inputs["communities"] = file_hash(cfg.communities)
        self._run(_Stage("topics", {"detector": cfg.detector, "seed": cfg.seed, "resolution": cfg.resolution},
                         topic_inputs), self._topics)

        self._run(_Stage("dynamics", {"window_days": cfg.window_days, "dump_vectors": cfg.dump_vectors,
                                      "reference": cfg.reference if cfg.dump_vectors else None},
                         {k: self.outputs[k] for k in ("ingest", "affiliate", "topics")}), self._dynamics)

        self._run(_Stage("similarity", {"reference": cfg.reference, "self": cfg.similarity_self,
                                        "cross": cfg.similarity_cross},
                         {"dynamics": self.outputs["dynamics"], "roster": file_hash(cfg.roster)}), self._similarity)

        self._run(_Stage("report", {"topics": cfg.report_topics},
                         {k: self.outputs[k] for k in ("ingest", "affiliate", "graph", "topics", "similarity")}),
                  self._report)
        return dict(self.status)

    # loaders shared by stages
    def store(self) -> RecordStore:
        return RecordStore.load(self.stage_dir("ingest") / "store")

    def affiliations(self) -> AffiliationResult:
        return AffiliationResult.read(self.stage_dir("affiliate") / "affiliations.csv")

    def graph(self) -> CooccurrenceGraph:
        return CooccurrenceGraph.read(self.stage_dir("graph"))

    def partition(self, graph: CooccurrenceGraph) -> topics.TopicPartition:
        return topics.TopicPartition.read(self.stage_dir("topics") / "communities.txt", graph)

    def _ingest(self, d: Path) -> None:
        cfg = self.cfg
        allowed = None
        if cfg.allow_list is not None:
            allowed = [line.strip() for line in cfg.allow_list.read_text(encoding="utf-8").splitlines() if line.strip()]
        store = parse_stream(cfg.tweets, cfg.capture(), allowed)
        store.save(d / "store")
        summary = {"records": len(store), "users": store.n_users, "hashtags": store.n_hashtags,
                   "stats": store.stats.to_dict(),
                   "classes": {k.value: v for k, v in store.class_counts().items()}}
        (d / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")

    def _affiliate(self, d: Path) -> None:
        cfg = self.cfg
        roster = PartyRoster.read(cfg.roster)
        result = infer_affiliations(self.store(), read_follows(cfg.follows), roster,
                                    cfg.affiliation_cutoff, cfg.affiliation_threshold)
        result.write(d / "affiliations.csv")
        (d / "sizes.json").write_text(json.dumps(result.sizes(), indent=1, sort_keys=True) + "\n", encoding="utf-8")

    def _graph(self, d: Path) -> None:
        cfg = self.cfg
        store = self.store()
        graph = build_graph(store, cfg.min_weight)
        aff = self.affiliations()
        scores = None
        if sum(1 for v in aff.sizes().values() if v > 0) >= 2:
            scores = political_scores(store, aff, cfg.kl_threshold)
            scores.write(d / "political.csv")
        if cfg.political_only:
            if scores is None:
                raise StageError("graph", "political_only needs affiliations for two parties")
            graph = graph.restrict(scores.political_tags())
        graph.write(d)

    def _topics(self, d: Path) -> None:
        cfg = self.cfg
        graph = self.graph()
        partition = topics.detect_topics(graph, cfg.detector, cfg.seed, cfg.resolution, cfg.communities)
        partition.write(d / "communities.txt")
        topics.write_summary(partition, d / "summary.json")
        topics.write_layout(graph, partition, d / "layout.csv")

    def _dynamics(self, d: Path) -> None:
        cfg = self.cfg
        graph = self.graph()
        daily = dynamics.daily_counts(self.store(), self.partition(graph), self.affiliations())
        dynamics.save_daily(daily, d)
        dynamics.write_matrices(list(dynamics.iter_windows(daily)), d / "matrices.csv")
        if cfg.dump_vectors:
            dynamics.write_vectors(list(dynamics.window_vectors(daily, cfg.reference)), d / "vectors.csv")

    def _similarity(self, d: Path) -> None:
        cfg = self.cfg
        daily = dynamics.load_daily(self.stage_dir("dynamics"))
        roster = PartyRoster.read(cfg.roster)
        requests = similarity.parse_requests(cfg.similarity_self, cfg.similarity_cross, roster.party_ids,
                                             roster.resolve)
        series = similarity.similarity_series(dynamics.window_vectors(daily, cfg.reference), daily.parties,
                                              requests, roster.party_ids)
        similarity.write_long(series, d / "series.csv")

    def _report(self, d: Path) -> None:
        cfg = self.cfg
        store = self.store()
        aff = self.affiliations()
        graph = self.graph()
        partition = self.partition(graph)
        chosen = cfg.report_topics
        if chosen is None:
            chosen = list(range(min(partition.n_topics, MAX_REPORT_TOPICS)))
        for t in chosen:
            usage = report.topic_usage(store, partition, aff, t)
            report.render(usage, "csv", d / f"topic_{t}_usage.csv")
            report.render(usage, "svg", d / f"topic_{t}_rolling.svg", mode="rolling")
            report.render(usage, "svg", d / f"topic_{t}_cumulative.svg", mode="cumulative")
            cmap = topics.coreness(graph, partition, t)
            report.render(cmap, "csv", d / f"kcore_topic_{t}.csv")
            report.render(cmap, "svg", d / f"kcore_topic_{t}.svg")
        series = similarity.read_long(self.stage_dir("similarity") / "series.csv")
        if series:
            report.render(series, "csv", d / "similarity_wide.csv")
            report.render(series, "svg", d / "similarity.svg")
            (d / "similarity_long.csv").write_text(report.similarity_long_csv(series), encoding="utf-8")


def run_pipeline(config: RunConfig, force: bool = False) -> dict[str, str]:
    """Run every stage in order; returns ``{stage: "ran" | "cached"}``."""
    return Pipeline(config, force).run()
