"""Operator surface: ingest, make-instances, run, trace, report.

Exit codes: 0 success, 1 configuration error, 2 partial failures above
the --failure-threshold fraction.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness, runner
from .errors import ConfigError, RecAgentError, UnknownEpisode
from .gateway import CompletionCache
from .harness import ExemplarConfig, ShotMode, TaskKind
from .report import METRIC_LAYOUT, render_metric_report
from .store import MemoryStore
from .tools import FixtureSearchProvider


def _fail(message: str, code: int = 1) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_ingest(args: argparse.Namespace) -> int:
    store = MemoryStore(args.store)
    try:
        stats = store.ingest(args.dataset_file, args.domain)
    except RecAgentError as exc:
        return _fail(str(exc))
    if stats.already_ingested:
        print(f"no new rows: {args.dataset_file} already ingested for "
              f"domain {args.domain!r}")
    print(f"items={stats.items} interactions={stats.interactions} "
          f"rejected={stats.rejected}")
    for reason, count in sorted(stats.reasons.items()):
        print(f"  rejected[{reason}]={count}")
    return 0


def cmd_make_instances(args: argparse.Namespace) -> int:
    store = MemoryStore(args.store)
    shots = ExemplarConfig(
        shot_count=args.shots,
        source_domain=args.shot_domain or args.domain,
        mode=ShotMode.TRANSFER if args.shot_domain and args.shot_domain != args.domain
        else ShotMode.IN_DOMAIN,
    )
    try:
        instances = harness.build_instances(
            store, args.domain, TaskKind(args.task), args.count, args.seed, shots
        )
    except (RecAgentError, ValueError) as exc:
        return _fail(str(exc))
    harness.save_instances(instances, args.out)
    print(f"wrote {len(instances)} instances to {args.out}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = runner.load_config(args.config)
    except ConfigError as exc:
        return _fail(str(exc))
    try:
        instances = harness.load_instances(args.instances)
    except OSError as exc:
        return _fail(f"cannot read instance set: {exc}")

    store = MemoryStore(args.store) if args.store else None
    provider = FixtureSearchProvider(args.search_fixtures) if args.search_fixtures else None
    cache = CompletionCache(args.cache) if args.cache else None
    try:
        report = runner.run_evaluation(
            config, instances, args.archive,
            store=store, search_provider=provider, cache=cache,
        )
    except ConfigError as exc:
        return _fail(str(exc))

    label = f"{config.strategy.value} ({config.shots.shot_count}-shot)"
    print(render_metric_report(report, label, config.domain))
    if report.n_evaluated + report.n_failed > 0:
        failure_rate = report.n_failed / max(1, len(instances))
        if failure_rate > args.failure_threshold:
            print(f"failure rate {failure_rate:.2f} above threshold "
                  f"{args.failure_threshold:.2f}", file=sys.stderr)
            return 2
    return 0


def cmd_trace(args: argparse.Namespace) -> int:
    try:
        record = runner.load_episode(args.archive, args.episode_id)
    except UnknownEpisode as exc:
        return _fail(str(exc))
    print(record["rendered_trace"] or "(no trace recorded)")
    if record.get("final_answer") is not None:
        print(f"\nFinal answer: {record['final_answer']}")
    intermediates = record.get("tool_outcomes", [])
    if intermediates:
        print("\nTool intermediates:")
        for outcome in intermediates:
            print(f"- {outcome['tool']}: {outcome.get('raw_intermediate')}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    report_path = Path(args.archive) / "report.json"
    if not report_path.exists():
        return _fail(f"no report.json under {args.archive}")
    data = json.loads(report_path.read_text(encoding="utf-8"))
    from .metrics import MetricReport

    report = MetricReport.from_dict(data)
    print(render_metric_report(report, args.label, args.domain))
    if args.json:
        print(json.dumps(data, sort_keys=True, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="recagent",
        description="Tool-augmented planning agent and recommendation "
                    "evaluation harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a JSONL dataset into the store")
    p.add_argument("dataset_file")
    p.add_argument("--domain", required=True)
    p.add_argument("--store", required=True, help="sqlite store path")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("make-instances", help="build a task instance set")
    p.add_argument("--store", required=True)
    p.add_argument("--domain", required=True)
    p.add_argument("--task", required=True, choices=[t.value for t in TaskKind])
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shots", type=int, default=0)
    p.add_argument("--shot-domain", default=None,
                   help="draw exemplars from this domain (transfer mode)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_instances)

    p = sub.add_parser("run", help="run an evaluation over an instance set")
    p.add_argument("--config", required=True, help="run config JSON")
    p.add_argument("--instances", required=True)
    p.add_argument("--archive", required=True, help="archive directory")
    p.add_argument("--store", default=None)
    p.add_argument("--search-fixtures", default=None,
                   help="JSON file of canned search results")
    p.add_argument("--cache", default=None, help="completion cache file")
    p.add_argument("--failure-threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trace", help="print one archived episode")
    p.add_argument("episode_id")
    p.add_argument("--archive", required=True)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("report", help="re-render an archived report")
    p.add_argument("--archive", required=True)
    p.add_argument("--label", default="run")
    p.add_argument("--domain", default="")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RecAgentError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
