"""Personalized memory and in-domain world knowledge.

Review-style datasets are ingested into a two-table relational schema
(item metadata + interaction history) held in an embedded sqlite
database, which then serves read-only SQL to the database tool and a
deterministic schema description for prompts.

Input format: newline-delimited JSON records, item rows and interaction
rows mixed freely. Field mappings (first match wins):

    item_id     item_id | asin | business_id
    title       title | name
    brand       brand
    price       price          (leading "$" tolerated)
    category    category | categories   (lists joined with ", ")
    description description             (lists joined with " ")
    user_id     user_id | reviewerID
    rating      rating | overall | stars
    review_text review_text | reviewText | text
    review_title review_title | summary
    timestamp   timestamp | unixReviewTime | date  (ISO dates accepted)

A row with a title is an item; a row with user + rating is an
interaction; anything else is rejected with a counted reason.
Interactions missing a timestamp get their file position, so per-user
order is total.
"""

from __future__ import annotations

import hashlib
import json
import sqlite3
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import NotReadOnly, QuerySyntaxError, UnreadableFile

MAX_ROWS = 1000

# Rejection reasons
OUT_OF_RANGE_RATING = "OutOfRangeRating"
MISSING_ITEM_REFERENCE = "MissingItemReference"
DUPLICATE_ITEM = "DuplicateItem"
DUPLICATE_INTERACTION = "DuplicateInteraction"
UNRECOGNIZED_RECORD = "UnrecognizedRecord"
MISSING_FIELD = "MissingField"


@dataclass(frozen=True)
class ItemRecord:
    item_id: str
    title: str
    brand: str | None = None
    price: float | None = None
    category: str | None = None
    description: str | None = None
    domain: str = ""


@dataclass(frozen=True)
class InteractionRecord:
    user_id: str
    item_id: str
    rating: float
    review_text: str | None = None
    review_title: str | None = None
    timestamp: int = 0
    domain: str = ""
    item_title: str = ""


@dataclass(frozen=True)
class SchemaDescription:
    text: str


@dataclass
class IngestionStats:
    items: int = 0
    interactions: int = 0
    rejected: int = 0
    reasons: dict[str, int] = field(default_factory=dict)
    already_ingested: bool = False

    def reject(self, reason: str) -> None:
        self.rejected += 1
        self.reasons[reason] = self.reasons.get(reason, 0) + 1

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.items, self.interactions, self.rejected)


_SCHEMA_SQL = """
CREATE TABLE IF NOT EXISTS items (
    item_id TEXT PRIMARY KEY,
    title TEXT NOT NULL COLLATE NOCASE,
    brand TEXT,
    price REAL,
    category TEXT,
    description TEXT,
    domain TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_items_title ON items (title COLLATE NOCASE);
CREATE TABLE IF NOT EXISTS interactions (
    user_id TEXT NOT NULL,
    item_id TEXT NOT NULL REFERENCES items (item_id),
    item_title TEXT NOT NULL COLLATE NOCASE,
    rating REAL NOT NULL CHECK (rating BETWEEN 1 AND 5),
    review_text TEXT,
    review_title TEXT,
    timestamp INTEGER NOT NULL,
    domain TEXT NOT NULL,
    UNIQUE (user_id, item_id, timestamp)
);
CREATE INDEX IF NOT EXISTS idx_interactions_user ON interactions (user_id);
CREATE INDEX IF NOT EXISTS idx_interactions_title ON interactions (item_title COLLATE NOCASE);
CREATE TABLE IF NOT EXISTS _ingestions (
    file_hash TEXT NOT NULL,
    domain TEXT NOT NULL,
    items INTEGER NOT NULL,
    interactions INTEGER NOT NULL,
    rejected INTEGER NOT NULL,
    PRIMARY KEY (file_hash, domain)
);
"""


def _first(record: dict, *names: str):
    for name in names:
        if name in record and record[name] is not None:
            return record[name]
    return None


def _as_text(value) -> str | None:
    if value is None:
        return None
    if isinstance(value, list):
        return ", ".join(str(v) for v in value)
    return str(value)


def _as_price(value) -> float | None:
    if value is None:
        return None
    if isinstance(value, str):
        value = value.lstrip("$").replace(",", "")
        if not value:
            return None
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


def _as_timestamp(value) -> int | None:
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return int(value)
    try:
        return int(value)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(str(value))
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return int(dt.timestamp())
    except ValueError:
        return None


def parse_item_row(record: dict, domain: str) -> ItemRecord | None:
    item_id = _first(record, "item_id", "asin", "business_id")
    title = _first(record, "title", "name")
    if item_id is None or title is None or not str(title):
        return None
    return ItemRecord(
        item_id=str(item_id),
        title=str(title),
        brand=_as_text(_first(record, "brand")),
        price=_as_price(_first(record, "price")),
        category=_as_text(_first(record, "category", "categories")),
        description=_as_text(_first(record, "description")),
        domain=domain,
    )


def parse_interaction_row(record: dict, domain: str, position: int) -> InteractionRecord | None:
    user_id = _first(record, "user_id", "reviewerID")
    item_id = _first(record, "item_id", "asin", "business_id")
    rating = _first(record, "rating", "overall", "stars")
    if user_id is None or item_id is None or rating is None:
        return None
    try:
        rating = float(rating)
    except (TypeError, ValueError):
        return None
    ts = _as_timestamp(_first(record, "timestamp", "unixReviewTime", "date"))
    return InteractionRecord(
        user_id=str(user_id),
        item_id=str(item_id),
        rating=rating,
        review_text=_as_text(_first(record, "review_text", "reviewText")),
        review_title=_as_text(_first(record, "review_title", "summary")),
        timestamp=ts if ts is not None else position,
        domain=domain,
    )


class MemoryStore:
    """Two-table relational store behind a read-only query surface.

    Single-writer during ingestion, many-reader afterwards; reads are
    serialized on one connection, which is all the concurrency the
    evaluation phase needs.
    """

    def __init__(self, path: str | Path = ":memory:"):
        self.path = str(path)
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._lock = threading.RLock()
        with self._lock:
            self._conn.executescript(_SCHEMA_SQL)
            self._conn.commit()

    def close(self) -> None:
        self._conn.close()

    # -- ingestion ---------------------------------------------------------

    def ingest(self, dataset_file: str | Path, domain: str) -> IngestionStats:
        """Load one JSONL file into the store; idempotent per (file, domain)."""
        path = Path(dataset_file)
        try:
            blob = path.read_bytes()
        except OSError as exc:
            raise UnreadableFile(f"cannot read {path}: {exc}") from exc

        file_hash = hashlib.sha256(blob).hexdigest()
        with self._lock:
            row = self._conn.execute(
                "SELECT items, interactions, rejected FROM _ingestions "
                "WHERE file_hash = ? AND domain = ?",
                (file_hash, domain),
            ).fetchone()
            if row is not None:
                return IngestionStats(
                    items=row[0], interactions=row[1], rejected=row[2],
                    already_ingested=True,
                )

        try:
            lines = blob.decode("utf-8").splitlines()
        except UnicodeDecodeError as exc:
            raise UnreadableFile(f"{path} is not UTF-8 text: {exc}") from exc

        stats = IngestionStats()
        records: list[tuple[int, dict]] = []
        for position, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                records.append((position, json.loads(line)))
            except json.JSONDecodeError:
                stats.reject(UNRECOGNIZED_RECORD)

        with self._lock:
            cur = self._conn.cursor()
            interactions: list[tuple[int, InteractionRecord]] = []
            # Items first so interaction rows may precede their item in the file.
            for position, record in records:
                if not isinstance(record, dict):
                    stats.reject(UNRECOGNIZED_RECORD)
                    continue
                item = parse_item_row(record, domain)
                if item is not None:
                    existing = cur.execute(
                        "SELECT 1 FROM items WHERE item_id = ?", (item.item_id,)
                    ).fetchone()
                    if existing is not None:
                        stats.reject(DUPLICATE_ITEM)
                        continue
                    cur.execute(
                        "INSERT INTO items VALUES (?, ?, ?, ?, ?, ?, ?)",
                        (item.item_id, item.title, item.brand, item.price,
                         item.category, item.description, item.domain),
                    )
                    stats.items += 1
                    continue
                inter = parse_interaction_row(record, domain, position)
                if inter is not None:
                    interactions.append((position, inter))
                else:
                    stats.reject(
                        MISSING_FIELD if ("rating" in record or "overall" in record
                                          or "stars" in record or "user_id" in record
                                          or "reviewerID" in record)
                        else UNRECOGNIZED_RECORD
                    )

            for position, inter in interactions:
                if not 1.0 <= inter.rating <= 5.0:
                    stats.reject(OUT_OF_RANGE_RATING)
                    continue
                title_row = cur.execute(
                    "SELECT title FROM items WHERE item_id = ?", (inter.item_id,)
                ).fetchone()
                if title_row is None:
                    stats.reject(MISSING_ITEM_REFERENCE)
                    continue
                dup = cur.execute(
                    "SELECT 1 FROM interactions WHERE user_id = ? AND item_id = ? "
                    "AND timestamp = ?",
                    (inter.user_id, inter.item_id, inter.timestamp),
                ).fetchone()
                if dup is not None:
                    stats.reject(DUPLICATE_INTERACTION)
                    continue
                cur.execute(
                    "INSERT INTO interactions VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
                    (inter.user_id, inter.item_id, title_row[0], inter.rating,
                     inter.review_text, inter.review_title, inter.timestamp,
                     inter.domain),
                )
                stats.interactions += 1

            cur.execute(
                "INSERT INTO _ingestions VALUES (?, ?, ?, ?, ?)",
                (file_hash, domain, stats.items, stats.interactions, stats.rejected),
            )
            self._conn.commit()
        return stats

    # -- read-only SQL surface ----------------------------------------------

    def execute_readonly(self, query: str) -> list[tuple]:
        """Run one SELECT; anything else is refused before it reaches sqlite."""
        stripped = query.strip().rstrip(";").strip()
        if not stripped.upper().startswith("SELECT"):
            raise NotReadOnly(f"only single SELECT statements are allowed: {query!r}")
        if ";" in stripped:
            raise NotReadOnly("multiple statements are not allowed")
        with self._lock:
            try:
                cur = self._conn.execute(stripped)
                return cur.fetchmany(MAX_ROWS)
            except sqlite3.Error as exc:
                raise QuerySyntaxError(str(exc)) from exc

    def schema_description(self) -> SchemaDescription:
        """Deterministic table/column listing with one example row per table."""
        lines = []
        with self._lock:
            for table in ("items", "interactions"):
                cols = [r[1] for r in self._conn.execute(f"PRAGMA table_info({table})")]
                lines.append(f"Table {table} with columns: {', '.join(cols)}.")
                example = self._conn.execute(
                    f"SELECT * FROM {table} ORDER BY rowid LIMIT 1"
                ).fetchone()
                if example is None:
                    lines.append(f"  Table {table} is currently empty.")
                else:
                    pairs = ", ".join(f"{c}={v!r}" for c, v in zip(cols, example))
                    lines.append(f"  Example row: {pairs}")
        return SchemaDescription(text="\n".join(lines))

    def checksum(self) -> str:
        """Content hash over both tables; constant across read-only episodes."""
        digest = hashlib.sha256()
        with self._lock:
            for table, order in (
                ("items", "item_id"),
                ("interactions", "user_id, item_id, timestamp"),
            ):
                for row in self._conn.execute(f"SELECT * FROM {table} ORDER BY {order}"):
                    digest.update(repr(row).encode("utf-8"))
        return digest.hexdigest()

    # -- typed read helpers (harness-facing) ---------------------------------

    def item_ids(self, domain: str | None = None) -> list[str]:
        sql = "SELECT item_id FROM items"
        args: tuple = ()
        if domain is not None:
            sql += " WHERE domain = ?"
            args = (domain,)
        sql += " ORDER BY item_id"
        with self._lock:
            return [r[0] for r in self._conn.execute(sql, args)]

    def item_title(self, item_id: str) -> str | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT title FROM items WHERE item_id = ?", (item_id,)
            ).fetchone()
        return row[0] if row else None

    def titles_by_id(self, domain: str | None = None) -> dict[str, str]:
        sql = "SELECT item_id, title FROM items"
        args: tuple = ()
        if domain is not None:
            sql += " WHERE domain = ?"
            args = (domain,)
        sql += " ORDER BY item_id"
        with self._lock:
            return {r[0]: r[1] for r in self._conn.execute(sql, args)}

    def user_ids(self, domain: str | None = None) -> list[str]:
        sql = "SELECT DISTINCT user_id FROM interactions"
        args: tuple = ()
        if domain is not None:
            sql += " WHERE domain = ?"
            args = (domain,)
        sql += " ORDER BY user_id"
        with self._lock:
            return [r[0] for r in self._conn.execute(sql, args)]

    def interactions_for_user(
        self, user_id: str, domain: str | None = None
    ) -> list[InteractionRecord]:
        sql = (
            "SELECT user_id, item_id, item_title, rating, review_text, "
            "review_title, timestamp, domain FROM interactions WHERE user_id = ?"
        )
        args: list = [user_id]
        if domain is not None:
            sql += " AND domain = ?"
            args.append(domain)
        sql += " ORDER BY timestamp, rowid"
        with self._lock:
            rows = self._conn.execute(sql, args).fetchall()
        return [
            InteractionRecord(
                user_id=r[0], item_id=r[1], item_title=r[2], rating=r[3],
                review_text=r[4], review_title=r[5], timestamp=r[6], domain=r[7],
            )
            for r in rows
        ]
