"""Command-line entry point; subcommands mirror the pipeline stages."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import dynamics, report, similarity, topics
from .affiliation import DEFAULT_THRESHOLD, AffiliationResult, PartyRoster, infer_affiliations, read_follows
from .ingest import CaptureConfig, RecordStore, _as_date, parse_stream
from .kernels import BACKEND
from .pipeline import RunConfig, StageError, run_pipeline
from .semantic_graph import (DEFAULT_KL_THRESHOLD, DEFAULT_MIN_WEIGHT, CooccurrenceGraph, PoliticalScore,
                             build_graph, political_scores)
from .synth import SynthSpec, generate

log = logging.getLogger("opinionscape")


def _workdir_path(args, name: str, override) -> Path:
    return Path(override) if override else Path(args.workdir) / name


def cmd_run(args) -> int:
    cfg = RunConfig.from_file(args.config)
    status = run_pipeline(cfg, force=args.force)
    for stage, state in status.items():
        print(f"{stage:<11} {state}")
    return 0


def cmd_ingest(args) -> int:
    config = CaptureConfig(_as_date(args.start), _as_date(args.end), args.window_days, args.probe_days,
                           args.utc_offset)
    allowed = None
    if args.allow_list:
        allowed = [x.strip() for x in Path(args.allow_list).read_text(encoding="utf-8").splitlines() if x.strip()]
    store = parse_stream(args.input, config, allowed)
    out = _workdir_path(args, "ingest/store", args.out)
    store.save(out)
    print(json.dumps({"records": len(store), "users": store.n_users, "hashtags": store.n_hashtags,
                      **store.stats.to_dict()}))
    return 0


def _store(args) -> RecordStore:
    return RecordStore.load(_workdir_path(args, "ingest/store", args.store))


def _affiliations(args) -> AffiliationResult:
    return AffiliationResult.read(_workdir_path(args, "affiliate/affiliations.csv", args.affiliations))


def _graph(args) -> CooccurrenceGraph:
    return CooccurrenceGraph.read(_workdir_path(args, "graph", args.graph))


def _partition(args, graph) -> topics.TopicPartition:
    return topics.TopicPartition.read(_workdir_path(args, "topics/communities.txt", args.topics), graph)


def cmd_affiliate(args) -> int:
    store = _store(args)
    roster = PartyRoster.read(args.roster)
    cutoff = args.cutoff or store.config.capture_end
    result = infer_affiliations(store, read_follows(args.follows), roster, cutoff, args.threshold)
    out = _workdir_path(args, "affiliate/affiliations.csv", args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    result.write(out)
    print(json.dumps(result.sizes()))
    return 0


def cmd_graph_build(args) -> int:
    graph = build_graph(_store(args), args.min_weight)
    if args.political:
        scores = PoliticalScore.read(args.political, args.kl_threshold)
        graph = graph.restrict(scores.political_tags())
    graph.write(_workdir_path(args, "graph", args.out))
    print(json.dumps({"nodes": graph.n_nodes, "edges": graph.n_edges}))
    return 0


def cmd_graph_political(args) -> int:
    scores = political_scores(_store(args), _affiliations(args), args.kl_threshold)
    out = _workdir_path(args, "graph/political.csv", args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    scores.write(out)
    print(json.dumps({"hashtags": len(scores.tags), "political": int(scores.is_political.sum())}))
    return 0


def cmd_topics_detect(args) -> int:
    graph = _graph(args)
    partition = topics.detect_topics(graph, args.detector, args.seed, args.resolution, args.communities)
    out = _workdir_path(args, "topics/communities.txt", args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    partition.write(out)
    print(json.dumps(topics.partition_summary(partition)))
    return 0


def cmd_topics_kcore(args) -> int:
    graph = _graph(args)
    cmap = topics.coreness(graph, _partition(args, graph), args.topic)
    text = report.render(cmap, "csv", args.out)
    if not args.out:
        sys.stdout.write(text)
    return 0


def cmd_dynamics_vectors(args) -> int:
    graph = _graph(args)
    store = _store(args)
    config = store.config
    if args.window_days != config.window_days:
        config = CaptureConfig(config.capture_start, config.capture_end, args.window_days,
                               config.activity_probe_days, config.utc_offset_hours)
    daily = dynamics.daily_counts(store, _partition(args, graph), _affiliations(args), config)
    out = _workdir_path(args, "dynamics", args.out)
    dynamics.save_daily(daily, out)
    dynamics.write_matrices(list(dynamics.iter_windows(daily)), out / "matrices.csv")
    dynamics.write_vectors(list(dynamics.window_vectors(daily, args.reference)), out / "vectors.csv")
    print(json.dumps({"users": len(daily.users), "topics": daily.n_topics, "days": len(daily.days)}))
    return 0


def cmd_similarity(args) -> int:
    daily = dynamics.load_daily(_workdir_path(args, "dynamics", args.daily))
    known = sorted(set(daily.parties))
    resolve = None
    if args.roster:
        roster = PartyRoster.read(args.roster)
        known, resolve = roster.party_ids, roster.resolve
    requests = similarity.parse_requests(args.self_groups, args.cross, known, resolve)
    series = similarity.similarity_series(dynamics.window_vectors(daily, args.reference), daily.parties,
                                          requests, known)
    out = _workdir_path(args, "similarity/series.csv", args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    similarity.write_long(series, out)
    print(json.dumps({s.label: len(s.dates) for s in series}))
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec.read(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    truth = generate(spec, args.out)
    print(json.dumps({"hashtags": len(truth.partition), "users": len(truth.affiliations)}))
    return 0


def cmd_report_topic(args) -> int:
    graph = _graph(args)
    usage = report.topic_usage(_store(args), _partition(args, graph), _affiliations(args), args.id, args.mode)
    text = report.render(usage, args.format, args.out, mode=args.mode)
    if not args.out:
        sys.stdout.write(text)
    return 0


def cmd_report_similarity(args) -> int:
    series = similarity.read_long(_workdir_path(args, "similarity/series.csv", args.series))
    out = Path(args.out) if args.out else Path(args.workdir) / "report"
    out.mkdir(parents=True, exist_ok=True)
    report.render(series, "csv", out / "similarity_wide.csv")
    report.render(series, "svg", out / "similarity.svg")
    (out / "similarity_long.csv").write_text(report.similarity_long_csv(series), encoding="utf-8")
    return 0


def cmd_report_kcore(args) -> int:
    graph = _graph(args)
    cmap = topics.coreness(graph, _partition(args, graph), args.topic)
    text = report.render(cmap, args.format, args.out)
    if not args.out:
        sys.stdout.write(text)
    return 0


def _add_inputs(p, *names) -> None:
    helps = {
        "store": "indexed store directory (default: WORKDIR/ingest/store)",
        "affiliations": "affiliation table (default: WORKDIR/affiliate/affiliations.csv)",
        "graph": "graph directory (default: WORKDIR/graph)",
        "topics": "community file (default: WORKDIR/topics/communities.txt)",
    }
    for n in names:
        p.add_argument(f"--{n}", help=helps[n])


class _HelpFormatter(argparse.HelpFormatter):
    """Appends the default to help text that does not already state one."""

    def _get_help_string(self, action):
        text = action.help or ""
        d = action.default
        if "default" in text or d is None or d is False or d == argparse.SUPPRESS or not action.option_strings:
            return text
        return f"{text} (default: {action.default})"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opinionscape", description=__doc__, formatter_class=_HelpFormatter)
    parser.add_argument("--workdir", default="work", help="directory holding stage artifacts")
    parser.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(container, *a, **kw):
        kw.setdefault("formatter_class", _HelpFormatter)
        return container.add_parser(*a, **kw)

    p = add(sub, "run", help="run every stage from a YAML/JSON run configuration")
    p.add_argument("--config", required=True, help="run configuration file")
    p.add_argument("--force", action="store_true", help="ignore cached stage artifacts")
    p.set_defaults(func=cmd_run)

    p = add(sub, "ingest", help="parse a JSONL tweet file into an indexed store")
    p.add_argument("--input", required=True, help="line-delimited JSON records")
    p.add_argument("--start", required=True, help="first capture day (ISO date)")
    p.add_argument("--end", required=True, help="last capture day, inclusive (ISO date)")
    p.add_argument("--probe-days", type=int, default=30,
                   help="activity probe: users must post within this many initial days")
    p.add_argument("--window-days", type=int, default=7, help="sliding window length in days")
    p.add_argument("--utc-offset", type=float, default=-3.0,
                   help="hours from UTC used to cut calendar days")
    p.add_argument("--allow-list", help="file with one permitted user id per line")
    p.add_argument("--out", help="store directory (default: WORKDIR/ingest/store)")
    p.set_defaults(func=cmd_ingest)

    p = add(sub, "affiliate", help="infer party support from candidate retweets and follows")
    _add_inputs(p, "store")
    p.add_argument("--roster", required=True, help="CSV: party_id, acronym, name, candidates")
    p.add_argument("--follows", required=True, help="CSV edge list: user_id, candidate_id")
    p.add_argument("--cutoff", help="primary-election date; only earlier evidence counts (default: capture end)")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                   help="minimum retweet share for one party")
    p.add_argument("--out", help="output path (default: under WORKDIR, or stdout for exports)")
    p.set_defaults(func=cmd_affiliate)

    g = add(sub, "graph", help="hashtag co-occurrence network").add_subparsers(dest="graph_cmd", required=True)
    p = add(g, "build", help="build and prune the co-occurrence graph")
    _add_inputs(p, "store")
    p.add_argument("--min-weight", type=int, default=DEFAULT_MIN_WEIGHT,
                   help="drop edges used together by fewer distinct users")
    p.add_argument("--political", help="political.csv; keep only political hashtags")
    p.add_argument("--kl-threshold", type=float, default=DEFAULT_KL_THRESHOLD,
                   help="political cutoff in bits, used with --political")
    p.add_argument("--out", help="output path (default: under WORKDIR, or stdout for exports)")
    p.set_defaults(func=cmd_graph_build)
    p = add(g, "political", help="relative-entropy political hashtag scores")
    _add_inputs(p, "store", "affiliations")
    p.add_argument("--kl-threshold", type=float, default=DEFAULT_KL_THRESHOLD,
                   help="bits at or above which a hashtag is political")
    p.add_argument("--out", help="output path (default: under WORKDIR, or stdout for exports)")
    p.set_defaults(func=cmd_graph_political)

    t = add(sub, "topics", help="topic detection and k-cores").add_subparsers(dest="topics_cmd", required=True)
    p = add(t, "detect", help="partition the graph into topics")
    _add_inputs(p, "graph")
    p.add_argument("--detector", choices=["default", "external"], default="default",
                   help="built-in seeded Louvain, or an external community file")
    p.add_argument("--communities", help="community file for --detector external")
    p.add_argument("--seed", type=int, default=0, help="seed for the node visit order")
    p.add_argument("--resolution", type=float, default=1.0, help="modularity resolution")
    p.add_argument("--out", help="output path (default: under WORKDIR, or stdout for exports)")
    p.set_defaults(func=cmd_topics_detect)
    p = add(t, "kcore", help="coreness table of one topic")
    _add_inputs(p, "graph", "topics")
    p.add_argument("--topic", type=int, required=True, help="topic id")
    p.add_argument("--out", help="output path (default: under WORKDIR, or stdout for exports)")
    p.set_defaults(func=cmd_topics_kcore)

    d = add(sub, "dynamics", help="windowed user-topic matrices").add_subparsers(dest="dyn_cmd", required=True)
    p = add(d, "vectors", help="window matrices and description vectors")
    _add_inputs(p, "store", "affiliations", "graph", "topics")
    p.add_argument("--window-days", type=int, default=7, help="sliding window length in days")
    p.add_argument("--reference", choices=dynamics.REFERENCES, default="users",
                   help="reference profile: 'users' averages every user's capture-wide profile, 'capture' "
                        "uses raw capture totals, 'window' and 'window-users' recompute them per window")
    p.add_argument("--out", help="output path (default: under WORKDIR, or stdout for exports)")
    p.set_defaults(func=cmd_dynamics_vectors)

    p = add(sub, "similarity", help="self/cross similarity series")
    p.add_argument("--daily", help="dynamics directory (default: WORKDIR/dynamics)")
    p.add_argument("--roster", help="roster CSV, lets requests use acronyms")
    p.add_argument("--self", dest="self_groups", default="all", help="'all' or comma-separated parties")
    p.add_argument("--cross", default="", help="'all' or pairs like JPC:FDT,FD:JPC")
    p.add_argument("--reference", choices=dynamics.REFERENCES, default="users",
                   help="reference profile (see 'dynamics vectors --help')")
    p.add_argument("--out", help="output path (default: under WORKDIR, or stdout for exports)")
    p.set_defaults(func=cmd_similarity)

    p = add(sub, "synth", help="generate a planted synthetic corpus")
    p.add_argument("--spec", required=True, help="YAML/JSON synthetic spec")
    p.add_argument("--seed", type=int, help="override the seed in the spec")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    r = add(sub, "report", help="plot-ready exports").add_subparsers(dest="report_cmd", required=True)
    p = add(r, "topic", help="topic usage per party")
    _add_inputs(p, "store", "affiliations", "graph", "topics")
    p.add_argument("--id", type=int, required=True, help="topic id")
    p.add_argument("--mode", choices=report.MODES, default="rolling",
                   help="series drawn in svg output; csv carries all three")
    p.add_argument("--format", choices=["csv", "svg"], default="csv", help="output format")
    p.add_argument("--out", help="output path (default: under WORKDIR, or stdout for exports)")
    p.set_defaults(func=cmd_report_topic)
    p = add(r, "similarity", help="wide/long similarity tables and chart")
    p.add_argument("--series", help="long similarity table (default: WORKDIR/similarity/series.csv)")
    p.add_argument("--out", help="output directory (default: WORKDIR/report)")
    p.set_defaults(func=cmd_report_similarity)
    p = add(r, "kcore", help="coreness export of one topic")
    _add_inputs(p, "graph", "topics")
    p.add_argument("--topic", type=int, required=True, help="topic id")
    p.add_argument("--format", choices=["csv", "svg"], default="csv", help="output format")
    p.add_argument("--out", help="output path (default: under WORKDIR, or stdout for exports)")
    p.set_defaults(func=cmd_report_kcore)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.debug("kernel backend: %s", BACKEND)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
