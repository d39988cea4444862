"""Completion gateway: scripted backend, cache, budget, retries."""

from __future__ import annotations

import threading

import pytest

from recagent.errors import BackendUnavailable, BudgetExceeded, ScriptExhausted
from recagent.gateway import (
    CompletionCache,
    CompletionRequest,
    LiveBackend,
    LLMGateway,
    ScriptedBackend,
    ScriptEntry,
    cache_key,
    dump_script,
    load_script,
)


def make_gateway(entries, **kwargs) -> LLMGateway:
    return LLMGateway(ScriptedBackend(entries), **kwargs)


def test_scripted_echo():
    gateway = make_gateway([ScriptEntry(matcher="2+2", response="4")])
    response = gateway.complete(CompletionRequest(prompt="2+2"))
    assert response.text == "4"
    assert response.cached is False


def test_cache_idempotence():
    gateway = make_gateway([ScriptEntry(matcher="2+2", response="4")],
                           cache=CompletionCache())
    first = gateway.complete(CompletionRequest(prompt="2+2"))
    second = gateway.complete(CompletionRequest(prompt="2+2"))
    assert (first.text, first.cached) == ("4", False)
    assert (second.text, second.cached) == ("4", True)


def test_unmatched_prompt_is_error():
    gateway = make_gateway([ScriptEntry(matcher="2+2", response="4")])
    with pytest.raises(ScriptExhausted):
        gateway.complete(CompletionRequest(prompt="3+3"))


def test_exact_match_beats_substring():
    backend = ScriptedBackend([
        ScriptEntry(matcher="abc", response="sub"),
        ScriptEntry(matcher="abc", response="exact", exact=True),
    ])
    assert backend.generate(CompletionRequest(prompt="abc")) == "exact"
    assert backend.generate(CompletionRequest(prompt="xxabcxx")) == "sub"


def test_first_declared_wins_among_equal_matches():
    backend = ScriptedBackend([
        ScriptEntry(matcher="abc", response="first"),
        ScriptEntry(matcher="abc", response="second"),
    ])
    assert backend.generate(CompletionRequest(prompt="abc!")) == "first"


def test_max_uses_consumed_in_declaration_order():
    backend = ScriptedBackend([
        ScriptEntry(matcher="go", response="one", max_uses=1),
        ScriptEntry(matcher="go", response="two", max_uses=1),
    ])
    assert backend.generate(CompletionRequest(prompt="go")) == "one"
    assert backend.generate(CompletionRequest(prompt="go")) == "two"
    with pytest.raises(ScriptExhausted):
        backend.generate(CompletionRequest(prompt="go"))


def test_request_validation():
    with pytest.raises(ValueError):
        CompletionRequest(prompt="")
    with pytest.raises(ValueError):
        CompletionRequest(prompt="x", temperature=1.5)
    with pytest.raises(ValueError):
        CompletionRequest(prompt="x", max_output_tokens=0)


def test_cache_key_determinism_and_tag_exclusion():
    a = CompletionRequest(prompt="p", temperature=0.0, tag="one")
    b = CompletionRequest(prompt="p", temperature=0.0, tag="two")
    assert cache_key(a, "m") == cache_key(b, "m")
    assert cache_key(a, "m") == cache_key(a, "m")


def test_cache_key_parameter_sensitivity():
    base = CompletionRequest(prompt="p", temperature=0.0)
    warm = CompletionRequest(prompt="p", temperature=0.7)
    assert cache_key(base, "m") != cache_key(warm, "m")
    assert cache_key(base, "m") != cache_key(base, "other-model")
    stop = CompletionRequest(prompt="p", stop_sequences=("\n",))
    assert cache_key(base, "m") != cache_key(stop, "m")


def test_cache_soundness_across_instances(tmp_path):
    path = tmp_path / "cache.dat"
    cache = CompletionCache(path)
    gateway = make_gateway([ScriptEntry(matcher="q", response="line1\nline2")],
                           cache=cache)
    gateway.complete(CompletionRequest(prompt="q?"))

    reloaded = CompletionCache(path)
    assert len(reloaded) == 1
    request = CompletionRequest(prompt="q?")
    assert reloaded.get(cache_key(request, "scripted")) == "line1\nline2"
    # A different request never sees that slot.
    other = CompletionRequest(prompt="q!!")
    assert reloaded.get(cache_key(other, "scripted")) is None


def test_cache_file_append_only(tmp_path):
    path = tmp_path / "cache.dat"
    cache = CompletionCache(path)
    cache.put("k1", "v1")
    cache.put("k2", "multi\nline\nvalue")
    cache.put("k1", "overwritten?")  # ignored: append-only semantics
    reloaded = CompletionCache(path)
    assert reloaded.get("k1") == "v1"
    assert reloaded.get("k2") == "multi\nline\nvalue"


def test_call_budget():
    gateway = make_gateway([ScriptEntry(matcher="", response="ok")], max_calls=2)
    gateway.complete(CompletionRequest(prompt="a"))
    gateway.complete(CompletionRequest(prompt="b"))
    assert gateway.calls_made == 2
    with pytest.raises(BudgetExceeded):
        gateway.complete(CompletionRequest(prompt="c"))


def test_call_log_records_tags():
    gateway = make_gateway([ScriptEntry(matcher="", response="ok")])
    gateway.complete(CompletionRequest(prompt="a", tag="planner.step"))
    gateway.complete(CompletionRequest(prompt="b", tag="tool.sql.translate"))
    assert [r.tag for r in gateway.calls_with_tag("planner.")] == ["planner.step"]


def test_concurrent_scripted_consumption_is_race_free():
    entries = [ScriptEntry(matcher="", response=str(i), max_uses=1)
               for i in range(16)]
    backend = ScriptedBackend(entries)
    results: list[str] = []
    lock = threading.Lock()

    def worker():
        text = backend.generate(CompletionRequest(prompt="x"))
        with lock:
            results.append(text)

    threads = [threading.Thread(target=worker) for _ in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(results, key=int) == [str(i) for i in range(16)]


def test_script_file_roundtrip(tmp_path):
    entries = [
        ScriptEntry(matcher="a", response="r1", max_uses=2),
        ScriptEntry(matcher="b", response="r2", exact=True),
    ]
    path = tmp_path / "script.json"
    dump_script(entries, path)
    loaded = load_script(path)
    assert loaded == entries


class FakeResponse:
    def __init__(self, status_code=200, body=None, text=""):
        self.status_code = status_code
        self._body = body or {}
        self.text = text

    def json(self):
        return self._body


def test_live_backend_retries_with_backoff():
    attempts = []
    sleeps = []

    def post(url, json=None, headers=None, timeout=None):
        attempts.append(url)
        if len(attempts) < 3:
            raise ConnectionError("refused")
        return FakeResponse(body={"choices": [{"message": {"content": "hi"}}]})

    backend = LiveBackend("http://example/v1/chat", "test-model",
                          post=post, sleep=sleeps.append)
    text = backend.generate(CompletionRequest(prompt="p"))
    assert text == "hi"
    assert len(attempts) == 3
    assert sleeps == [0.5, 1.0]


def test_live_backend_gives_up_after_bounded_retries():
    def post(url, json=None, headers=None, timeout=None):
        raise ConnectionError("refused")

    backend = LiveBackend("http://example/v1/chat", "test-model",
                          post=post, sleep=lambda s: None)
    with pytest.raises(BackendUnavailable):
        backend.generate(CompletionRequest(prompt="p"))


def test_live_backend_client_error_is_not_retried():
    calls = []

    def post(url, json=None, headers=None, timeout=None):
        calls.append(1)
        return FakeResponse(status_code=401, text="no key")

    backend = LiveBackend("http://example/v1/chat", "test-model",
                          post=post, sleep=lambda s: None)
    with pytest.raises(BackendUnavailable):
        backend.generate(CompletionRequest(prompt="p"))
    assert len(calls) == 1
