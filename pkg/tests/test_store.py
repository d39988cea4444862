"""Memory store: ingestion, read-only SQL, schema description."""

from __future__ import annotations

import json

import pytest

from recagent.errors import NotReadOnly, QuerySyntaxError, UnreadableFile
from recagent.store import (
    MISSING_ITEM_REFERENCE,
    OUT_OF_RANGE_RATING,
    MemoryStore,
)


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path


@pytest.fixture
def small_dataset(tmp_path):
    rows = [
        {"item_id": "I1", "title": "Sewak Al-Falah", "brand": "Al-Falah", "price": 6.99},
        {"item_id": "I2", "title": "Gentle Cleanser", "category": "Beauty"},
        {"item_id": "I3", "title": "Herbal Balm"},
        {"user_id": "u1", "item_id": "I1", "rating": 4, "timestamp": 100,
         "review_text": "good", "review_title": "Solid"},
        {"user_id": "u2", "item_id": "I1", "rating": 5, "timestamp": 200},
        {"user_id": "u1", "item_id": "I2", "rating": 3, "timestamp": 300},
        {"user_id": "u1", "item_id": "I3", "rating": 2, "timestamp": 400},
        {"user_id": "u2", "item_id": "I3", "rating": 4, "timestamp": 500},
    ]
    return write_jsonl(tmp_path / "small.jsonl", rows)


def test_ingest_counts(small_dataset):
    store = MemoryStore()
    stats = store.ingest(small_dataset, "beauty")
    assert stats.as_tuple() == (3, 5, 0)


def test_ingest_rejects_out_of_range_rating(tmp_path):
    rows = [
        {"item_id": "I1", "title": "Thing"},
        {"user_id": "u1", "item_id": "I1", "rating": 7, "timestamp": 1},
    ]
    store = MemoryStore()
    stats = store.ingest(write_jsonl(tmp_path / "d.jsonl", rows), "beauty")
    assert stats.as_tuple() == (1, 0, 1)
    assert stats.reasons == {OUT_OF_RANGE_RATING: 1}


def test_ingest_idempotent(small_dataset):
    store = MemoryStore()
    first = store.ingest(small_dataset, "beauty")
    second = store.ingest(small_dataset, "beauty")
    assert second.as_tuple() == first.as_tuple()
    assert second.already_ingested is True
    assert store.execute_readonly("SELECT COUNT(*) FROM interactions") == [(5,)]


def test_ingest_enforces_referential_integrity(tmp_path):
    rows = [
        {"item_id": "I1", "title": "Thing"},
        {"user_id": "u1", "item_id": "MISSING", "rating": 3, "timestamp": 1},
        {"user_id": "u1", "item_id": "I1", "rating": 3, "timestamp": 2},
    ]
    store = MemoryStore()
    stats = store.ingest(write_jsonl(tmp_path / "d.jsonl", rows), "beauty")
    assert stats.as_tuple() == (1, 1, 1)
    assert stats.reasons == {MISSING_ITEM_REFERENCE: 1}


def test_ingest_conservation(tmp_path):
    rows = [
        {"item_id": "I1", "title": "Thing"},
        {"item_id": "I1", "title": "Thing again"},          # duplicate id
        {"user_id": "u1", "item_id": "I1", "rating": 9},     # out of range
        {"user_id": "u1", "item_id": "I1", "rating": 4},
        {"nonsense": True},                                  # unrecognized
    ]
    store = MemoryStore()
    stats = store.ingest(write_jsonl(tmp_path / "d.jsonl", rows), "x")
    assert stats.items + stats.interactions + stats.rejected == len(rows)


def test_ingest_missing_file():
    store = MemoryStore()
    with pytest.raises(UnreadableFile):
        store.ingest("/nonexistent/data.jsonl", "beauty")


def test_ingest_amazon_and_yelp_field_mappings(tmp_path):
    rows = [
        {"asin": "A1", "title": "Amazon Thing", "categories": ["Beauty", "Care"]},
        {"business_id": "Y1", "name": "Yelp Diner"},
        {"reviewerID": "u1", "asin": "A1", "overall": 5.0,
         "reviewText": "great", "summary": "Loved it", "unixReviewTime": 999},
        {"user_id": "u2", "business_id": "Y1", "stars": 3.0, "text": "meh",
         "date": "2020-01-01T00:00:00"},
    ]
    store = MemoryStore()
    stats = store.ingest(write_jsonl(tmp_path / "d.jsonl", rows), "mixed")
    assert stats.as_tuple() == (2, 2, 0)
    rec = store.interactions_for_user("u1")[0]
    assert (rec.item_id, rec.rating, rec.review_title) == ("A1", 5.0, "Loved it")
    assert rec.timestamp == 999
    rec = store.interactions_for_user("u2")[0]
    assert rec.item_title == "Yelp Diner"
    assert rec.timestamp > 0


def test_missing_timestamps_default_to_record_order(tmp_path):
    rows = [
        {"item_id": "I1", "title": "One"},
        {"item_id": "I2", "title": "Two"},
        {"user_id": "u1", "item_id": "I2", "rating": 3},
        {"user_id": "u1", "item_id": "I1", "rating": 4},
    ]
    store = MemoryStore()
    store.ingest(write_jsonl(tmp_path / "d.jsonl", rows), "x")
    ordered = [r.item_id for r in store.interactions_for_user("u1")]
    assert ordered == ["I2", "I1"]


def test_execute_readonly_average(small_dataset):
    store = MemoryStore()
    store.ingest(small_dataset, "beauty")
    rows = store.execute_readonly(
        "SELECT AVG(rating) FROM interactions WHERE item_title='Sewak Al-Falah'"
    )
    assert rows == [(4.5,)]


def test_execute_readonly_rejects_writes(small_dataset):
    store = MemoryStore()
    store.ingest(small_dataset, "beauty")
    with pytest.raises(NotReadOnly):
        store.execute_readonly("DELETE FROM items")
    with pytest.raises(NotReadOnly):
        store.execute_readonly("SELECT 1; DROP TABLE items")


def test_execute_readonly_rejects_garbage():
    store = MemoryStore()
    with pytest.raises(QuerySyntaxError):
        store.execute_readonly("SELECT FROM WHERE nonsense !!")


def test_execute_readonly_row_limit(tmp_path):
    rows = [{"item_id": f"I{i}", "title": f"Item {i}"} for i in range(1100)]
    store = MemoryStore()
    store.ingest(write_jsonl(tmp_path / "d.jsonl", rows), "x")
    assert len(store.execute_readonly("SELECT item_id FROM items")) == 1000


def test_title_match_is_case_insensitive(small_dataset):
    store = MemoryStore()
    store.ingest(small_dataset, "beauty")
    rows = store.execute_readonly(
        "SELECT AVG(rating) FROM interactions WHERE item_title='sewak al-falah'"
    )
    assert rows == [(4.5,)]


def test_schema_description_mentions_tables_and_columns(small_dataset):
    store = MemoryStore()
    store.ingest(small_dataset, "beauty")
    text = store.schema_description().text
    assert "items" in text and "interactions" in text
    for column in ("item_id", "title", "brand", "price", "category",
                   "description", "user_id", "rating", "review_text",
                   "review_title", "timestamp", "item_title"):
        assert column in text
    assert "Example row" in text


def test_schema_description_deterministic(small_dataset):
    store = MemoryStore()
    store.ingest(small_dataset, "beauty")
    assert store.schema_description().text == store.schema_description().text


def test_schema_description_empty_store():
    store = MemoryStore()
    text = store.schema_description().text
    assert "empty" in text


def test_checksum_constant_across_reads(small_dataset):
    store = MemoryStore()
    store.ingest(small_dataset, "beauty")
    before = store.checksum()
    store.execute_readonly("SELECT * FROM interactions")
    store.schema_description()
    assert store.checksum() == before
