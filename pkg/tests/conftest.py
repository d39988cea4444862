"""Shared fixtures: deterministic datasets, script builders, stub tools.

Scripts are authored as per-call-type queues: every planner call kind
carries a unique cue phrase in its prompt, so entries matching that cue
with max_uses=1 serve the k-th call of that kind with the k-th declared
response, regardless of strategy.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

import pytest

from recagent import prompts
from recagent.gateway import ScriptEntry
from recagent.planning import ActionSpec, Tool
from recagent.store import MemoryStore
from recagent.tools import ToolOutcome

# -- scripted episode building ------------------------------------------------


@dataclass
class Step:
    thought: str
    tool: str = "SearchTool"
    argument: str = "query"

    def response(self) -> str:
        return f"Thought: {self.thought}\nAction: {self.tool}[{self.argument}]"


def step_entry(response: str) -> ScriptEntry:
    return ScriptEntry(matcher=prompts.STEP_CUE, response=response, max_uses=1)


def build_script(
    steps: list[Step],
    final_answer: str = "done",
    end: str = "eop",                        # "eop" | "budget" | "finish"
    inspire_responses: list[str] | None = None,
    alt_actions: list[str] | None = None,
    eval_responses: list[str] | None = None,
    votes: list[int] | None = None,
    decoys_per_step: int = 2,
) -> list[ScriptEntry]:
    """Entries serving all four strategies over the same step sequence.

    When inspire/eval/vote queues are not given, inspire returns the
    sentinel, evaluations return "sure", and votes pick candidate 1, so
    every strategy reproduces the same state sequence.
    """
    entries: list[ScriptEntry] = []

    for step in steps:
        entries.append(step_entry(step.response()))
    if end == "eop":
        entries.append(step_entry(prompts.END_OF_PLANNING))

    for i, step in enumerate(steps):
        lines = [f"1. {step.response()}"]
        for d in range(decoys_per_step):
            lines.append(
                f"{d + 2}. Thought: decoy {i}-{d}\nAction: SearchTool[decoy {i}-{d}]"
            )
        entries.append(ScriptEntry(matcher=prompts.SAMPLE_CUE,
                                   response="\n".join(lines), max_uses=1))
    if end == "eop":
        entries.append(ScriptEntry(matcher=prompts.SAMPLE_CUE,
                                   response=f"1. {prompts.END_OF_PLANNING}",
                                   max_uses=1))

    for choice in votes or []:
        entries.append(ScriptEntry(matcher=prompts.VOTE_CUE,
                                   response=f"The best choice is {choice}",
                                   max_uses=1))
    entries.append(ScriptEntry(matcher=prompts.VOTE_CUE,
                               response="The best choice is 1"))

    for verdict in eval_responses or []:
        entries.append(ScriptEntry(matcher=prompts.BRANCH_EVAL_CUE,
                                   response=f"The branch is {verdict}",
                                   max_uses=1))
    entries.append(ScriptEntry(matcher=prompts.BRANCH_EVAL_CUE,
                               response="The branch is sure"))

    for response in inspire_responses or []:
        entries.append(ScriptEntry(matcher=prompts.INSPIRE_CUE,
                                   response=response, max_uses=1))
    entries.append(ScriptEntry(matcher=prompts.INSPIRE_CUE,
                               response=prompts.EMPTY_RESPONSE))

    for action in alt_actions or []:
        entries.append(ScriptEntry(matcher=prompts.ALT_ACTION_CUE,
                                   response=action, max_uses=1))

    entries.append(ScriptEntry(matcher=prompts.FINALIZE_CUE, response=final_answer))
    return entries


class StubToolbox:
    """Deterministic dispatcher for planner-only tests."""

    def __init__(self, observations: dict[tuple[str, str], str] | None = None):
        self.observations = observations or {}
        self.calls: list[ActionSpec] = []

    def dispatch(self, action: ActionSpec, context: dict | None = None) -> ToolOutcome:
        self.calls.append(action)
        default = f"obs:{action.tool.value}:{action.argument}"
        observation = self.observations.get(
            (action.tool.value, action.argument), default
        )
        return ToolOutcome(observation=observation, tool=action.tool)


@pytest.fixture
def stub_toolbox() -> StubToolbox:
    return StubToolbox()


# -- fixture datasets ------------------------------------------------------------

_ADJECTIVES = ["Gentle", "Radiant", "Classic", "Herbal", "Velvet", "Pure",
               "Golden", "Fresh", "Silk", "Bold"]
_NOUNS = ["Cleanser", "Serum", "Balm", "Cream", "Oil", "Mask", "Toner",
          "Scrub", "Mist", "Lotion"]
_REVIEW_SENTENCES = [
    "works exactly as described and arrived quickly",
    "the scent is mild and the texture feels light",
    "my whole family uses this every day now",
    "packaging was damaged but the product is fine",
    "noticeable difference after two weeks of use",
    "a bit pricey but the quality justifies it",
    "would not repurchase, it dried out my skin",
    "great value compared to the salon brands",
]
_REVIEW_TITLES = [
    "Five Stars", "Solid buy", "Does the job", "Love it", "Five Stars",
    "Not bad", "Wonderful", "My new favorite", "Decent", "Great gift",
]


def write_domain_dataset(
    path: Path,
    domain: str,
    n_items: int = 150,
    n_users: int = 40,
    seed: int = 11,
    user_offset: int = 0,
) -> None:
    """Deterministic JSONL dataset: items first, then interactions."""
    rng = random.Random(seed)
    prefix = domain.capitalize()
    rows: list[dict] = []
    item_ids = []
    for i in range(n_items):
        item_id = f"{domain[:2].upper()}{i:04d}"
        item_ids.append(item_id)
        rows.append({
            "item_id": item_id,
            "title": f"{prefix} {_ADJECTIVES[i % 10]} {_NOUNS[(i // 10) % 10]} {i:03d}",
            "brand": f"Brand{i % 7}",
            "price": round(3.0 + (i % 50) * 0.8, 2),
            "category": f"{prefix} Care",
            "description": f"A {prefix.lower()} product, catalog number {i}.",
        })

    if domain == "beauty":
        rows.append({
            "item_id": "B0SEWAK01",
            "title": "Sewak Al-Falah",
            "brand": "Al-Falah",
            "price": 6.99,
            "category": "Oral Care",
            "description": "Natural toothbrush (miswak) stick.",
        })

    base_ts = 1_600_000_000
    tick = 0
    for u in range(n_users):
        user_id = f"u{user_offset + u:03d}"
        count = rng.randint(4, 9)
        chosen = rng.sample(item_ids, count)
        for item_id in chosen:
            tick += 1
            sentence = rng.choice(_REVIEW_SENTENCES)
            rows.append({
                "user_id": user_id,
                "item_id": item_id,
                "rating": float(rng.randint(1, 5)),
                "review_text": f"{sentence} ({user_id}/{item_id})",
                "review_title": rng.choice(_REVIEW_TITLES),
                "timestamp": base_ts + tick * 3600,
            })

    if domain == "beauty":
        for user_id, rating in (("u900", 4.0), ("u901", 5.0)):
            tick += 1
            rows.append({
                "user_id": user_id,
                "item_id": "B0SEWAK01",
                "rating": rating,
                "review_text": "This miswak is durable and has a good price.",
                "review_title": "Traditional and effective",
                "timestamp": base_ts + tick * 3600,
            })

    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory) -> Path:
    directory = tmp_path_factory.mktemp("datasets")
    write_domain_dataset(directory / "beauty.jsonl", "beauty",
                         n_items=150, n_users=40, seed=11)
    write_domain_dataset(directory / "toys.jsonl", "toys",
                         n_items=120, n_users=25, seed=23, user_offset=20)
    return directory


@pytest.fixture(scope="session")
def fixture_store(dataset_dir: Path, tmp_path_factory) -> MemoryStore:
    """Session store with the beauty and toys domains ingested."""
    store = MemoryStore(tmp_path_factory.mktemp("store") / "memory.db")
    store.ingest(dataset_dir / "beauty.jsonl", "beauty")
    store.ingest(dataset_dir / "toys.jsonl", "toys")
    return store
