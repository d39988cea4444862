"""Uniform completion interface: live HTTP backend, scripted backend, cache.

Every planner and tool-internal model call flows through
:class:`LLMGateway`. The scripted backend makes whole episodes
deterministic and is the test oracle for all planning semantics; the
cache makes live reruns cheap. Identical requests (including
temperature) hit the same cache slot, so a repeated non-zero-temperature
request replays the first sample.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from .errors import BackendUnavailable, BudgetExceeded, ScriptExhausted


@dataclass(frozen=True)
class CompletionRequest:
    """One completion call: prompt plus sampling parameters.

    ``tag`` labels the caller ("planner.step", "tool.sql.translate", ...)
    for accounting and archives; it never affects the response or the
    cache key.
    """

    prompt: str
    temperature: float = 0.0
    max_output_tokens: int = 512
    stop_sequences: tuple[str, ...] = ()
    tag: str = ""

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 1]")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")
        # Tolerate lists in literals; store a hashable tuple.
        object.__setattr__(self, "stop_sequences", tuple(self.stop_sequences))


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    backend_id: str
    cached: bool
    latency_ms: float


@dataclass
class ScriptEntry:
    """One scripted response: matched by exact prompt or prompt substring.

    ``max_uses`` of None means unlimited; entries with a use budget stop
    matching once consumed. Matching precedence: exact beats substring,
    first-declared wins among equal matches.
    """

    matcher: str
    response: str
    max_uses: int | None = None
    exact: bool = False

    def __post_init__(self) -> None:
        if self.max_uses is not None and self.max_uses < 1:
            raise ValueError("max_uses must be positive when given")


class Backend(Protocol):
    backend_id: str

    def generate(self, request: CompletionRequest) -> str: ...


class ScriptedBackend:
    """Deterministic backend that replays declared matcher/response entries.

    Consumption is serialized so use counts are race-free; an unmatched
    prompt raises :class:`ScriptExhausted`, never a silent default.
    """

    def __init__(self, entries: list[ScriptEntry], backend_id: str = "scripted"):
        self.backend_id = backend_id
        self._entries = list(entries)
        self._remaining = [e.max_uses for e in self._entries]
        self._lock = threading.Lock()

    def generate(self, request: CompletionRequest) -> str:
        with self._lock:
            for exact_pass in (True, False):
                for i, entry in enumerate(self._entries):
                    if entry.exact is not exact_pass:
                        continue
                    if self._remaining[i] == 0:
                        continue
                    hit = (
                        request.prompt == entry.matcher
                        if entry.exact
                        else entry.matcher in request.prompt
                    )
                    if hit:
                        if self._remaining[i] is not None:
                            self._remaining[i] -= 1
                        return entry.response
        head = request.prompt if len(request.prompt) <= 200 else request.prompt[:200] + "..."
        raise ScriptExhausted(
            f"no script entry matches prompt (tag={request.tag!r}): {head!r}"
        )


def load_script(path: str | Path) -> list[ScriptEntry]:
    """Read a script file: a JSON list of {match, response, max_uses, mode}."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = []
    for rec in raw:
        entries.append(
            ScriptEntry(
                matcher=rec["match"],
                response=rec["response"],
                max_uses=rec.get("max_uses"),
                exact=rec.get("mode", "substring") == "exact",
            )
        )
    return entries


def dump_script(entries: list[ScriptEntry], path: str | Path) -> None:
    recs = [
        {
            "match": e.matcher,
            "response": e.response,
            "max_uses": e.max_uses,
            "mode": "exact" if e.exact else "substring",
        }
        for e in entries
    ]
    Path(path).write_text(json.dumps(recs, indent=2), encoding="utf-8")


class LiveBackend:
    """Chat-completion HTTP backend.

    Speaks the common ``POST {endpoint}`` JSON contract: ``model``,
    ``messages``, ``temperature``, ``max_tokens``, ``stop``; reads
    ``choices[0].message.content``. Transient failures are retried 3
    times with exponential backoff starting at 500 ms.
    """

    MAX_RETRIES = 3
    BACKOFF_S = 0.5

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "RECAGENT_API_KEY",
        timeout_s: float = 60.0,
        post: Callable | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        import os

        self.endpoint = endpoint
        self.model = model
        self.backend_id = model
        self.timeout_s = timeout_s
        self._api_key = os.environ.get(api_key_env, "")
        self._sleep = sleep
        if post is None:
            import requests

            post = requests.post
        self._post = post

    def generate(self, request: CompletionRequest) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        if request.stop_sequences:
            payload["stop"] = list(request.stop_sequences)
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"

        last_error: Exception | None = None
        for attempt in range(self.MAX_RETRIES + 1):
            if attempt:
                self._sleep(self.BACKOFF_S * 2 ** (attempt - 1))
            try:
                resp = self._post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout_s
                )
                status = getattr(resp, "status_code", 200)
                if status >= 500 or status == 429:
                    last_error = BackendUnavailable(f"HTTP {status}")
                    continue
                if status >= 400:
                    raise BackendUnavailable(f"HTTP {status}: {getattr(resp, 'text', '')[:200]}")
                body = resp.json()
                return body["choices"][0]["message"]["content"]
            except BackendUnavailable:
                raise
            except Exception as exc:  # network errors, malformed bodies
                last_error = exc
        raise BackendUnavailable(f"backend failed after retries: {last_error}")


def cache_key(request: CompletionRequest, backend_id: str) -> str:
    """Stable content hash of everything that determines a response.

    Covers (prompt, temperature, max_output_tokens, stop_sequences,
    backend_id); the caller tag is excluded on purpose.
    """
    material = json.dumps(
        [
            request.prompt,
            repr(float(request.temperature)),
            request.max_output_tokens,
            list(request.stop_sequences),
            backend_id,
        ],
        ensure_ascii=False,
    )
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


class CompletionCache:
    """Append-only (key, response) store, optionally file-persisted.

    File format: newline-delimited records, each a length-prefixed key
    and response — ``<key_len>:<key><resp_len>:<resp>\\n`` with lengths in
    UTF-8 bytes, so responses may themselves contain newlines.
    """

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._data: dict[str, str] = {}
        self._lock = threading.Lock()
        if self._path is not None and self._path.exists():
            self._load()

    def _load(self) -> None:
        blob = self._path.read_bytes()
        pos = 0

        def take(data: bytes, start: int) -> tuple[str, int]:
            colon = data.index(b":", start)
            length = int(data[start:colon])
            end = colon + 1 + length
            return data[colon + 1 : end].decode("utf-8"), end

        while pos < len(blob):
            key, pos = take(blob, pos)
            value, pos = take(blob, pos)
            if pos < len(blob) and blob[pos : pos + 1] == b"\n":
                pos += 1
            self._data[key] = value

    def _append(self, key: str, value: str) -> None:
        kb = key.encode("utf-8")
        vb = value.encode("utf-8")
        record = str(len(kb)).encode() + b":" + kb + str(len(vb)).encode() + b":" + vb + b"\n"
        with open(self._path, "ab") as fh:
            fh.write(record)

    def get(self, key: str) -> str | None:
        with self._lock:
            return self._data.get(key)

    def put(self, key: str, value: str) -> None:
        with self._lock:
            if key in self._data:
                return
            self._data[key] = value
            if self._path is not None:
                self._append(key, value)

    def __len__(self) -> int:
        return len(self._data)


@dataclass
class CallRecord:
    """Archived view of one gateway call."""

    tag: str
    prompt: str
    response: str
    cached: bool
    latency_ms: float


@dataclass
class LLMGateway:
    """Front door for completions: cache lookup, budget accounting, log.

    Construct one gateway per episode (sharing ``backend`` and ``cache``
    across episodes is fine); ``max_calls`` is then the per-episode call
    budget and ``calls_made``/``log`` record that episode's traffic.
    complete() is safe for concurrent use.
    """

    backend: Backend
    cache: CompletionCache | None = None
    max_calls: int | None = None
    calls_made: int = 0
    log: list[CallRecord] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        with self._lock:
            if self.max_calls is not None and self.calls_made >= self.max_calls:
                raise BudgetExceeded(
                    f"episode call budget of {self.max_calls} reached"
                )
            self.calls_made += 1

        start = time.perf_counter()
        key = cache_key(request, self.backend.backend_id)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                response = CompletionResponse(
                    text=hit,
                    backend_id=self.backend.backend_id,
                    cached=True,
                    latency_ms=(time.perf_counter() - start) * 1000.0,
                )
                self._record(request, response)
                return response

        text = self.backend.generate(request)
        if self.cache is not None:
            self.cache.put(key, text)
        response = CompletionResponse(
            text=text,
            backend_id=self.backend.backend_id,
            cached=False,
            latency_ms=(time.perf_counter() - start) * 1000.0,
        )
        self._record(request, response)
        return response

    def _record(self, request: CompletionRequest, response: CompletionResponse) -> None:
        with self._lock:
            self.log.append(
                CallRecord(
                    tag=request.tag,
                    prompt=request.prompt,
                    response=response.text,
                    cached=response.cached,
                    latency_ms=response.latency_ms,
                )
            )

    def calls_with_tag(self, *prefixes: str) -> list[CallRecord]:
        return [r for r in self.log if any(r.tag.startswith(p) for p in prefixes)]
