"""Evaluation episodes for the five recommendation tasks.

Splits are leave-last-out per user (users with fewer than three
interactions are dropped and counted). Direct recommendation hides the
held-out item among 99 sampled negatives drawn from items the user
never interacted with, with the positive's position also seeded.
Few-shot exemplars are user-specific: drawn from the same user's train
split in the source domain when possible, else from the nearest users
by interaction count.

Instances are self-contained (candidate titles travel with them) and
serialize to JSONL so the same episode set can be re-run across
backends.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping

from . import prompts
from .errors import InsufficientItems
from .store import InteractionRecord, MemoryStore

MIN_INTERACTIONS = 3
DIRECT_REC_CANDIDATES = 100
RANKED_LIST_LEN = 10

AUTO_TITLE_BLOCKLIST = (
    "five stars", "four stars", "three stars", "two stars", "one star",
)


class TaskKind(str, Enum):
    RATING = "rating"
    SEQUENTIAL = "sequential"
    DIRECT = "direct"
    EXPLANATION = "explanation"
    SUMMARIZATION = "summarization"


class ShotMode(str, Enum):
    IN_DOMAIN = "in_domain"
    TRANSFER = "transfer"


@dataclass(frozen=True)
class ExemplarConfig:
    shot_count: int = 3
    source_domain: str = ""
    mode: ShotMode = ShotMode.IN_DOMAIN

    def __post_init__(self) -> None:
        if self.shot_count < 0:
            raise ValueError("shot_count must be >= 0")

    def validate_for(self, eval_domain: str) -> None:
        if self.mode is ShotMode.TRANSFER and self.source_domain == eval_domain:
            raise ValueError("transfer mode requires source_domain != evaluation domain")


ZERO_SHOT = ExemplarConfig(shot_count=0)


@dataclass
class TaskInstance:
    """One evaluation episode."""

    task: TaskKind
    user_id: str
    target_item: str
    ground_truth: float | str
    domain: str = ""
    candidates: list[str] | None = None
    history: list[str] = field(default_factory=list)
    shots: list[tuple[str, str]] = field(default_factory=list)
    seed: int = 0
    item_titles: dict[str, str] = field(default_factory=dict)
    # Review text under summarization (the ground truth is the title).
    review_text: str | None = None

    def __post_init__(self) -> None:
        if self.task is TaskKind.DIRECT:
            if self.candidates is None or len(self.candidates) != DIRECT_REC_CANDIDATES:
                raise ValueError(f"direct instances need exactly {DIRECT_REC_CANDIDATES} candidates")
            if len(set(self.candidates)) != len(self.candidates):
                raise ValueError("duplicate candidates")
            if self.candidates.count(self.target_item) != 1:
                raise ValueError("exactly one candidate must be the target")
            leaked = set(self.candidates) & set(self.history)
            if leaked - {self.target_item}:
                raise ValueError(f"negatives leak user history: {sorted(leaked)[:3]}")
        if self.task is TaskKind.SEQUENTIAL and self.target_item in self.history:
            raise ValueError("history must exclude the target item")
        if self.task is TaskKind.RATING and not 1.0 <= float(self.ground_truth) <= 5.0:
            raise ValueError("rating ground truth outside [1, 5]")

    def to_dict(self) -> dict:
        return {
            "task": self.task.value,
            "user_id": self.user_id,
            "target_item": self.target_item,
            "ground_truth": self.ground_truth,
            "domain": self.domain,
            "candidates": self.candidates,
            "history": list(self.history),
            "shots": [list(s) for s in self.shots],
            "seed": self.seed,
            "item_titles": dict(self.item_titles),
            "review_text": self.review_text,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TaskInstance":
        return cls(
            task=TaskKind(data["task"]),
            user_id=data["user_id"],
            target_item=data["target_item"],
            ground_truth=data["ground_truth"],
            domain=data.get("domain", ""),
            candidates=data.get("candidates"),
            history=list(data.get("history", [])),
            shots=[tuple(s) for s in data.get("shots", [])],
            seed=data.get("seed", 0),
            item_titles=dict(data.get("item_titles", {})),
            review_text=data.get("review_text"),
        )


def save_instances(instances: list[TaskInstance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")


def load_instances(path: str | Path) -> list[TaskInstance]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(TaskInstance.from_dict(json.loads(line)))
    return out


@dataclass
class Prediction:
    task: TaskKind
    value: float | list[str] | str | None
    raw_answer: str
    clamped: bool = False
    failed: bool = False
    failure: str | None = None


def derive_seed(seed: int, label: str) -> int:
    """Independent deterministic substream for (seed, label)."""
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


# -- splitting -----------------------------------------------------------------

@dataclass
class UserSplit:
    user_id: str
    train: list[InteractionRecord]
    target: InteractionRecord

    @property
    def history_items(self) -> list[str]:
        return [r.item_id for r in self.train]

    @property
    def all_items(self) -> set[str]:
        return {r.item_id for r in self.train} | {self.target.item_id}


@dataclass
class DatasetSplit:
    domain: str
    users: dict[str, UserSplit]
    dropped: int


def split_dataset(store: MemoryStore, domain: str) -> DatasetSplit:
    """Leave-last-out per user; deterministic for a given store."""
    users: dict[str, UserSplit] = {}
    dropped = 0
    for user_id in store.user_ids(domain):
        interactions = store.interactions_for_user(user_id, domain)
        if len(interactions) < MIN_INTERACTIONS:
            dropped += 1
            continue
        users[user_id] = UserSplit(
            user_id=user_id, train=interactions[:-1], target=interactions[-1]
        )
    return DatasetSplit(domain=domain, users=users, dropped=dropped)


def sample_negatives(
    store: MemoryStore, domain: str, user_id: str, n: int, seed: int
) -> list[str]:
    """n distinct items the user never interacted with, order seeded."""
    interacted = {r.item_id for r in store.interactions_for_user(user_id, domain)}
    pool = [i for i in store.item_ids(domain) if i not in interacted]
    if len(pool) < n:
        raise InsufficientItems(
            f"user {user_id}: {len(pool)} eligible items, need {n}"
        )
    return random.Random(seed).sample(pool, n)


def build_candidates(negatives: list[str], positive: str, seed: int) -> list[str]:
    """Insert the positive at a seed-determined position."""
    position = random.Random(derive_seed(seed, "positive-position")).randrange(
        len(negatives) + 1
    )
    return negatives[:position] + [positive] + negatives[position:]


# -- exemplars --------------------------------------------------------------------

def _exemplar_for(
    task: TaskKind,
    split: UserSplit,
    titles: Mapping[str, str],
    store: MemoryStore,
    domain: str,
    seed: int,
) -> tuple[str, str] | None:
    """Build one (question, answer) pair from a user's train interactions."""
    train = split.train
    if not train:
        return None
    last = train[-1]
    title = titles.get(last.item_id, last.item_title)
    if task is TaskKind.RATING:
        question = prompts.RATING_QUESTION_TEMPLATE.format(
            user_id=split.user_id, item_title=title
        )
        return question, f"{last.rating:g}"
    if task is TaskKind.SEQUENTIAL:
        if len(train) < 2:
            return None
        history_titles = [titles.get(r.item_id, r.item_title) for r in train[:-1]]
        question = prompts.SEQUENTIAL_REC_QUESTION_TEMPLATE.format(
            user_id=split.user_id, history=prompts.render_title_list(history_titles)
        )
        return question, title
    if task is TaskKind.DIRECT:
        try:
            negatives = sample_negatives(store, domain, split.user_id, 9, seed)
        except InsufficientItems:
            return None
        candidate_ids = build_candidates(negatives, last.item_id, seed)
        candidate_titles = [titles.get(i, i) for i in candidate_ids]
        question = prompts.DIRECT_REC_QUESTION_TEMPLATE.format(
            user_id=split.user_id,
            candidates=prompts.render_title_list(candidate_titles),
        )
        return question, title
    if task is TaskKind.EXPLANATION:
        if not last.review_text:
            return None
        question = prompts.EXPLANATION_QUESTION_TEMPLATE.format(
            user_id=split.user_id, item_title=title
        )
        return question, last.review_text
    if task is TaskKind.SUMMARIZATION:
        if not last.review_text or not last.review_title:
            return None
        question = prompts.SUMMARIZATION_QUESTION_TEMPLATE.format(
            user_id=split.user_id, review=last.review_text
        )
        return question, last.review_title
    return None


def select_exemplars(
    store: MemoryStore,
    source_split: DatasetSplit,
    user_id: str,
    task: TaskKind,
    config: ExemplarConfig,
    seed: int,
) -> list[tuple[str, str]]:
    """User-specific few-shot pairs from the source-domain train split.

    The user's own split leads; gaps are filled from the nearest users
    by interaction count (ties broken by user id).
    """
    if config.shot_count == 0:
        return []
    titles = store.titles_by_id(source_split.domain)
    own = source_split.users.get(user_id)
    own_count = len(own.train) + 1 if own else 0

    ordered: list[UserSplit] = []
    if own is not None:
        ordered.append(own)
    others = [u for uid, u in sorted(source_split.users.items()) if uid != user_id]
    others.sort(key=lambda u: (abs(len(u.train) + 1 - own_count), u.user_id))
    ordered.extend(others)

    shots: list[tuple[str, str]] = []
    for i, candidate in enumerate(ordered):
        if len(shots) >= config.shot_count:
            break
        pair = _exemplar_for(task, candidate, titles, store, source_split.domain,
                             derive_seed(seed, f"shot-{i}"))
        if pair is not None:
            shots.append(pair)
    return shots


# -- instance construction -----------------------------------------------------------

def build_instances(
    store: MemoryStore,
    domain: str,
    task: TaskKind,
    count: int,
    seed: int,
    shots: ExemplarConfig = ZERO_SHOT,
) -> list[TaskInstance]:
    """Deterministic instance set: seeded user sample over the split."""
    shots.validate_for(domain)
    eval_split = split_dataset(store, domain)
    source_domain = (shots.source_domain
                     if shots.mode is ShotMode.TRANSFER else domain)
    source_split = (eval_split if source_domain == domain
                    else split_dataset(store, source_domain))
    titles = store.titles_by_id(domain)

    user_ids = sorted(eval_split.users)
    rng = random.Random(derive_seed(seed, "user-sample"))
    rng.shuffle(user_ids)

    instances: list[TaskInstance] = []
    for index, user_id in enumerate(user_ids):
        if len(instances) >= count:
            break
        split = eval_split.users[user_id]
        target = split.target
        instance_seed = derive_seed(seed, f"instance-{index}")
        exemplars = select_exemplars(store, source_split, user_id, task, shots,
                                     instance_seed)

        if task is TaskKind.RATING:
            ground: float | str = target.rating
            candidates = None
        elif task is TaskKind.SEQUENTIAL:
            ground = target.item_id
            candidates = None
        elif task is TaskKind.DIRECT:
            try:
                negatives = sample_negatives(
                    store, domain, user_id, DIRECT_REC_CANDIDATES - 1, instance_seed
                )
            except InsufficientItems:
                continue
            candidates = build_candidates(negatives, target.item_id, instance_seed)
            ground = target.item_id
        elif task is TaskKind.EXPLANATION:
            if not target.review_text:
                continue
            ground = target.review_text
            candidates = None
        else:  # SUMMARIZATION
            if not target.review_text or not target.review_title:
                continue
            ground = target.review_title
            candidates = None

        relevant_ids = set(split.history_items) | {target.item_id}
        if candidates:
            relevant_ids |= set(candidates)
        instances.append(TaskInstance(
            task=task,
            user_id=user_id,
            target_item=target.item_id,
            ground_truth=ground,
            domain=domain,
            candidates=candidates,
            history=split.history_items,
            shots=exemplars,
            seed=instance_seed,
            item_titles={i: titles[i] for i in sorted(relevant_ids) if i in titles},
            review_text=(target.review_text
                         if task is TaskKind.SUMMARIZATION else None),
        ))

    if task is TaskKind.SUMMARIZATION:
        instances = filter_summarization_tests(instances)
    return instances


def filter_summarization_tests(
    instances: list[TaskInstance],
    blocklist: tuple[str, ...] = AUTO_TITLE_BLOCKLIST,
) -> list[TaskInstance]:
    """Drop instances whose reference title is an auto-generated star label."""
    blocked = {b.casefold() for b in blocklist}
    return [
        inst for inst in instances
        if str(inst.ground_truth).strip().casefold() not in blocked
    ]


# -- prompt construction ----------------------------------------------------------

def task_question(instance: TaskInstance) -> str:
    titles = instance.item_titles
    target_title = titles.get(instance.target_item, instance.target_item)
    if instance.task is TaskKind.RATING:
        return prompts.RATING_QUESTION_TEMPLATE.format(
            user_id=instance.user_id, item_title=target_title
        )
    if instance.task is TaskKind.DIRECT:
        candidate_titles = [titles.get(i, i) for i in instance.candidates]
        return prompts.DIRECT_REC_QUESTION_TEMPLATE.format(
            user_id=instance.user_id,
            candidates=prompts.render_title_list(candidate_titles),
        )
    if instance.task is TaskKind.SEQUENTIAL:
        history_titles = [titles.get(i, i) for i in instance.history]
        return prompts.SEQUENTIAL_REC_QUESTION_TEMPLATE.format(
            user_id=instance.user_id,
            history=prompts.render_title_list(history_titles),
        )
    if instance.task is TaskKind.EXPLANATION:
        return prompts.EXPLANATION_QUESTION_TEMPLATE.format(
            user_id=instance.user_id, item_title=target_title
        )
    return prompts.SUMMARIZATION_QUESTION_TEMPLATE.format(
        user_id=instance.user_id, review=instance.review_text or ""
    )


def build_prompt(
    instance: TaskInstance,
    config: ExemplarConfig | None = None,
    database_info: str = "",
) -> str:
    """Deterministic episode prompt: preamble, tools, shots, task question."""
    parts = [prompts.agent_preamble(database_info)]
    shots = instance.shots if config is None or config.shot_count else []
    for i, (question, answer) in enumerate(shots, start=1):
        parts.append(f"Example {i}:\n{question}\nAnswer: {answer}")
    parts.append(task_question(instance))
    return "\n\n".join(parts)


# -- prediction parsing -----------------------------------------------------------

_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?")
_RANKED_LINE_RE = re.compile(r"^\s*\d+[.)]\s*(.+?)\s*$", re.M)


def normalize_title(title: str) -> str:
    text = re.sub(r"\s+", " ", title.casefold()).strip()
    return text.strip("\"'`.,;:!?()[]{}")


def title_index(titles_by_id: Mapping[str, str]) -> dict[str, str]:
    """Normalized title -> item id (first id wins on collisions)."""
    index: dict[str, str] = {}
    for item_id, title in titles_by_id.items():
        index.setdefault(normalize_title(title), item_id)
    return index


def _extract_titles(answer: str) -> list[str]:
    numbered = _RANKED_LINE_RE.findall(answer)
    if numbered:
        return numbered
    bracket = re.search(r"\[(.*)\]", answer, re.S)
    if bracket:
        inner = bracket.group(1)
        quoted = re.findall(r"'((?:[^'\\]|\\.)*)'|\"((?:[^\"\\]|\\.)*)\"", inner)
        if quoted:
            return [a or b for a, b in quoted]
        return [p for p in (s.strip() for s in inner.split(",")) if p]
    lines = [ln.strip() for ln in answer.splitlines() if ln.strip()]
    if len(lines) > 1:
        return lines
    return [p for p in (s.strip() for s in answer.split(",")) if p]


def parse_prediction(
    instance: TaskInstance,
    final_answer: str,
    catalog: Mapping[str, str] | None = None,
) -> Prediction:
    """Turn an episode's final answer into a scoreable prediction.

    Rating: first number, clamped into [1, 5]. Ranking tasks: ordered
    titles matched by normalized-title exact match (unmatched dropped,
    capped at 10); direct recommendation only admits candidate items.
    Text tasks pass the answer through verbatim. Unparseable answers
    yield a failed prediction, never an exception.
    """
    task = instance.task
    answer = final_answer or ""
    if task is TaskKind.RATING:
        match = _NUMBER_RE.search(answer)
        if not match:
            return Prediction(task, None, answer, failed=True,
                              failure="UnparseableAnswer")
        value = float(match.group(0))
        clamped = not 1.0 <= value <= 5.0
        return Prediction(task, min(5.0, max(1.0, value)), answer, clamped=clamped)

    if task in (TaskKind.DIRECT, TaskKind.SEQUENTIAL):
        lookup = title_index(catalog if catalog is not None else instance.item_titles)
        allowed = set(instance.candidates) if task is TaskKind.DIRECT else None
        ranked: list[str] = []
        for raw_title in _extract_titles(answer):
            item_id = lookup.get(normalize_title(raw_title.replace("\\'", "'")))
            if item_id is None:
                continue
            if allowed is not None and item_id not in allowed:
                continue
            if item_id not in ranked:
                ranked.append(item_id)
        if not ranked:
            return Prediction(task, None, answer, failed=True,
                              failure="UnparseableAnswer")
        return Prediction(task, ranked[:RANKED_LIST_LEN], answer)

    return Prediction(task, answer, answer)
