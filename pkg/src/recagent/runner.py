"""Evaluation runs: configuration, episode execution, archive, aggregation.

A run takes (config, instance set, backend) and is fully determined by
them: episodes execute with a fresh gateway each (scripted backends are
re-instantiated per episode so consumption never leaks across episodes
or threads), per-instance records land in the archive as one JSON file
per episode, and the aggregate report is computed from the archive.
Resuming a run skips instances whose record already exists, so an
interrupted run converges to the same report bytes.

``budgets.max_calls`` is the run-level call budget; each episode's
gateway gets an even slice of it. Live-backend runs refuse to start when
``instance_count * step_budget`` exceeds it.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import harness, metrics
from .errors import ConfigError, RecAgentError, UnknownEpisode
from .gateway import (
    Backend,
    CompletionCache,
    LiveBackend,
    LLMGateway,
    ScriptedBackend,
    load_script,
)
from .harness import ExemplarConfig, Prediction, ShotMode, TaskInstance, TaskKind
from .planning import PlannerConfig, PlanningEngine, Strategy, render_context, trace_to_dict
from .store import MemoryStore
from .tools import SearchProvider, Toolbox

CONFIG_VERSION = 1


@dataclass(frozen=True)
class Budgets:
    step_budget: int = 15
    max_calls: int = 1000
    max_cost_estimate: float = 0.0

    def __post_init__(self) -> None:
        if self.step_budget < 1 or self.max_calls < 1:
            raise ValueError("budgets must be positive")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "scripted"            # "scripted" | "live"
    script: str | None = None         # scripted: path to script file
    endpoint: str | None = None       # live: chat-completion URL
    model: str | None = None
    api_key_env: str = "RECAGENT_API_KEY"

    def __post_init__(self) -> None:
        if self.kind not in ("scripted", "live"):
            raise ValueError(f"unknown backend kind {self.kind!r}")


@dataclass(frozen=True)
class RunConfig:
    domain: str
    task: TaskKind
    strategy: Strategy
    shots: ExemplarConfig = field(default_factory=ExemplarConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    seed: int = 0
    parallelism: int = 1
    budgets: Budgets = field(default_factory=Budgets)

    def __post_init__(self) -> None:
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")


def _check_keys(data: dict, allowed: set[str], where: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def config_from_dict(data: dict) -> RunConfig:
    _check_keys(data, {"version", "domain", "task", "strategy", "shots",
                       "backend", "seed", "parallelism", "budgets"}, "config")
    if data.get("version") != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {data.get('version')!r}")
    try:
        shots_data = data.get("shots", {})
        _check_keys(shots_data, {"shot_count", "source_domain", "mode"}, "shots")
        backend_data = data.get("backend", {})
        _check_keys(backend_data, {"kind", "script", "endpoint", "model",
                                   "api_key_env"}, "backend")
        budget_data = data.get("budgets", {})
        _check_keys(budget_data, {"step_budget", "max_calls",
                                  "max_cost_estimate"}, "budgets")
        return RunConfig(
            domain=data["domain"],
            task=TaskKind(data["task"]),
            strategy=Strategy(data["strategy"]),
            shots=ExemplarConfig(
                shot_count=shots_data.get("shot_count", 3),
                source_domain=shots_data.get("source_domain", ""),
                mode=ShotMode(shots_data.get("mode", "in_domain")),
            ),
            backend=BackendConfig(**backend_data),
            seed=data.get("seed", 0),
            parallelism=data.get("parallelism", 1),
            budgets=Budgets(**budget_data),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(config: RunConfig) -> dict:
    return {
        "version": CONFIG_VERSION,
        "domain": config.domain,
        "task": config.task.value,
        "strategy": config.strategy.value,
        "shots": {
            "shot_count": config.shots.shot_count,
            "source_domain": config.shots.source_domain,
            "mode": config.shots.mode.value,
        },
        "backend": {
            "kind": config.backend.kind,
            "script": config.backend.script,
            "endpoint": config.backend.endpoint,
            "model": config.backend.model,
            "api_key_env": config.backend.api_key_env,
        },
        "seed": config.seed,
        "parallelism": config.parallelism,
        "budgets": {
            "step_budget": config.budgets.step_budget,
            "max_calls": config.budgets.max_calls,
            "max_cost_estimate": config.budgets.max_cost_estimate,
        },
    }


def load_config(path: str | Path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data)


def save_config(config: RunConfig, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(config_to_dict(config), indent=2, sort_keys=True),
        encoding="utf-8",
    )


def backend_factory(config: BackendConfig) -> Callable[[], Backend]:
    """Fresh-per-episode factory for scripted, shared instance for live."""
    if config.kind == "scripted":
        if not config.script:
            raise ConfigError("scripted backend requires a script path")
        entries = load_script(config.script)
        return lambda: ScriptedBackend(entries)
    if not config.endpoint or not config.model:
        raise ConfigError("live backend requires endpoint and model")
    shared = LiveBackend(config.endpoint, config.model, config.api_key_env)
    return lambda: shared


# -- episodes --------------------------------------------------------------------


def episode_id(index: int, instance: TaskInstance) -> str:
    return f"ep{index:04d}-{instance.user_id}"


def score_instance(instance: TaskInstance, prediction: Prediction) -> dict[str, float]:
    """Per-instance metric contributions; failures score worst-case."""
    task = instance.task
    if task is TaskKind.RATING:
        if prediction.failed or prediction.value is None:
            return {}
        return {"predicted": float(prediction.value),
                "truth": float(instance.ground_truth)}
    if task in (TaskKind.DIRECT, TaskKind.SEQUENTIAL):
        ranked = prediction.value if isinstance(prediction.value, list) else []
        scores = {}
        for k in (5, 10):
            hr, ndcg = metrics.hr_ndcg_at_k(ranked, instance.target_item, k)
            scores[f"HR@{k}"] = hr
            scores[f"NDCG@{k}"] = ndcg
        return scores
    reference = str(instance.ground_truth)
    candidate = prediction.value if isinstance(prediction.value, str) else ""
    return {
        "BLEU2": metrics.bleu_n(candidate, reference, 2),
        "ROUGE1": metrics.rouge(candidate, reference, "R1"),
        "ROUGE2": metrics.rouge(candidate, reference, "R2"),
        "ROUGEL": metrics.rouge(candidate, reference, "RL"),
    }


def run_episode(
    index: int,
    instance: TaskInstance,
    config: RunConfig,
    make_backend: Callable[[], Backend],
    store: MemoryStore | None,
    search_provider: SearchProvider | None,
    cache: CompletionCache | None,
    per_episode_calls: int,
    catalog: dict[str, str] | None,
) -> dict:
    start = time.perf_counter()
    gateway = LLMGateway(make_backend(), cache=cache, max_calls=per_episode_calls)
    toolbox = Toolbox(store=store, gateway=gateway, search_provider=search_provider)
    engine = PlanningEngine(
        gateway, PlannerConfig(step_budget=config.budgets.step_budget)
    )
    database_info = store.schema_description().text if store is not None else ""
    prompt = harness.build_prompt(instance, config.shots, database_info)

    record: dict = {
        "episode_id": episode_id(index, instance),
        "index": index,
        "user_id": instance.user_id,
        "task": instance.task.value,
        "strategy": config.strategy.value,
        "prompt": prompt,
        "failed": False,
        "failure": None,
    }
    try:
        trace = engine.run(config.strategy, prompt,
                           config.budgets.step_budget, toolbox)
        prediction = harness.parse_prediction(instance, trace.final_answer or "",
                                              catalog)
        record["trace"] = trace_to_dict(trace)
        record["rendered_trace"] = render_context(trace, "full")
        record["final_answer"] = trace.final_answer
        record["failed"] = prediction.failed
        record["failure"] = prediction.failure
    except RecAgentError as exc:
        prediction = Prediction(instance.task, None, "", failed=True,
                                failure=exc.category)
        record["trace"] = None
        record["rendered_trace"] = ""
        record["final_answer"] = None
        record["failed"] = True
        record["failure"] = exc.category

    record["prediction"] = {
        "value": prediction.value,
        "clamped": prediction.clamped,
    }
    record["scores"] = score_instance(instance, prediction)
    record["calls"] = [
        {"tag": c.tag, "prompt": c.prompt, "response": c.response, "cached": c.cached}
        for c in gateway.log
    ]
    record["tool_outcomes"] = [
        {
            "tool": o.tool.value,
            "observation": o.observation,
            "raw_intermediate": o.raw_intermediate,
        }
        for o in toolbox.outcomes
    ]
    record["duration_ms"] = (time.perf_counter() - start) * 1000.0
    return record


# -- aggregation --------------------------------------------------------------------


def aggregate(task: TaskKind, records: list[dict]) -> metrics.MetricReport:
    """Archive records -> MetricReport. Rating failures are excluded with a
    count; ranking failures count as misses; text failures score zero."""
    n_failed = sum(1 for r in records if r["failed"])
    if task is TaskKind.RATING:
        pairs = [
            (r["scores"]["predicted"], r["scores"]["truth"])
            for r in records
            if not r["failed"] and "predicted" in r["scores"]
        ]
        values: dict[str, float] = {}
        if pairs:
            rmse, mae = metrics.rmse_mae(pairs)
            values = {"RMSE": rmse, "MAE": mae}
        return metrics.MetricReport(task=task.value, metric_values=values,
                                    n_evaluated=len(pairs), n_failed=n_failed)

    if task in (TaskKind.DIRECT, TaskKind.SEQUENTIAL):
        names = ["HR@5", "NDCG@5", "HR@10", "NDCG@10"]
    else:
        names = ["BLEU2", "ROUGE1", "ROUGE2", "ROUGEL"]
    values = {}
    if records:
        for name in names:
            values[name] = sum(r["scores"].get(name, 0.0) for r in records) / len(records)
    return metrics.MetricReport(task=task.value, metric_values=values,
                                n_evaluated=len(records), n_failed=n_failed)


# -- run orchestration -----------------------------------------------------------------


def _episodes_dir(archive_dir: str | Path) -> Path:
    return Path(archive_dir) / "episodes"


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_suffix(".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def run_evaluation(
    config: RunConfig,
    instances: list[TaskInstance],
    archive_dir: str | Path,
    store: MemoryStore | None = None,
    search_provider: SearchProvider | None = None,
    cache: CompletionCache | None = None,
) -> metrics.MetricReport:
    """Run every instance, archive per-instance records, emit the report.

    The triple (config, instance set, script) fully determines the
    report bytes; completed episodes found in the archive are not
    re-run.
    """
    if not instances:
        raise ConfigError("empty instance set")
    estimated = len(instances) * config.budgets.step_budget
    if config.backend.kind == "live" and estimated > config.budgets.max_calls:
        raise ConfigError(
            f"estimated {estimated} step calls exceed max_calls="
            f"{config.budgets.max_calls}; raise the budget or shrink the run"
        )
    per_episode_calls = max(1, config.budgets.max_calls // len(instances))

    make_backend = backend_factory(config.backend)
    episodes = _episodes_dir(archive_dir)
    episodes.mkdir(parents=True, exist_ok=True)
    catalog = store.titles_by_id(config.domain) if store is not None else None

    pending = [
        (i, inst) for i, inst in enumerate(instances)
        if not (episodes / f"{episode_id(i, inst)}.json").exists()
    ]

    def work(item: tuple[int, TaskInstance]) -> None:
        index, instance = item
        record = run_episode(index, instance, config, make_backend, store,
                             search_provider, cache, per_episode_calls, catalog)
        _write_atomic(
            episodes / f"{record['episode_id']}.json",
            json.dumps(record, sort_keys=True, ensure_ascii=False, indent=1),
        )

    if config.parallelism == 1 or len(pending) <= 1:
        for item in pending:
            work(item)
    else:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            list(pool.map(work, pending))

    report = aggregate_archive(config.task, archive_dir)
    _write_atomic(
        Path(archive_dir) / "report.json",
        json.dumps(report.to_dict(), sort_keys=True, indent=2),
    )
    return report


def load_records(archive_dir: str | Path) -> list[dict]:
    episodes = _episodes_dir(archive_dir)
    records = []
    if episodes.is_dir():
        for path in sorted(episodes.glob("*.json")):
            records.append(json.loads(path.read_text(encoding="utf-8")))
    records.sort(key=lambda r: r["index"])
    return records


def aggregate_archive(task: TaskKind, archive_dir: str | Path) -> metrics.MetricReport:
    return aggregate(task, load_records(archive_dir))


def load_episode(archive_dir: str | Path, episode: str) -> dict:
    path = _episodes_dir(archive_dir) / f"{episode}.json"
    if not path.exists():
        raise UnknownEpisode(f"no archived episode {episode!r} in {archive_dir}")
    return json.loads(path.read_text(encoding="utf-8"))
