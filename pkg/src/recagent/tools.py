"""The three agent tools plus Finish behind one dispatch surface.

Dispatch never lets a tool error escape into the planning loop: every
failure becomes an ``"Error: <category>"`` observation so the episode
can continue. Store access is strictly read-only; observations are
capped at 2000 characters with a tail truncation marker.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from . import prompts
from .errors import (
    ConversionFailed,
    EmptyInput,
    SearchUnavailable,
    SqlExecutionFailed,
    SqlGenerationFailed,
    StoreError,
    ToolFailure,
)
from .gateway import CompletionRequest, LLMGateway
from .planning import ActionSpec, Tool
from .store import MemoryStore

OBSERVATION_CAP = 2000
TRUNCATION_MARKER = "...[truncated]"


def clip_observation(text: str) -> str:
    if len(text) <= OBSERVATION_CAP:
        return text
    return text[: OBSERVATION_CAP - len(TRUNCATION_MARKER)] + TRUNCATION_MARKER


@dataclass(frozen=True)
class ToolOutcome:
    observation: str
    tool: Tool
    raw_intermediate: str | None = None
    duration_ms: float = 0.0


class SearchProvider(Protocol):
    def search(self, question: str) -> dict: ...


def normalize_question(question: str) -> str:
    return re.sub(r"\s+", " ", question).strip().strip("?!.").casefold()


class FixtureSearchProvider:
    """Canned results keyed by normalized question.

    Accepts either a mapping or a path to a JSON file of
    ``{question: result_object}``; result objects follow the documented
    search schema (``{"results": [{"title", "snippet", "link"}, ...]}``).
    """

    def __init__(self, fixtures: dict | str | Path):
        if isinstance(fixtures, (str, Path)):
            fixtures = json.loads(Path(fixtures).read_text(encoding="utf-8"))
        self._fixtures = {normalize_question(q): r for q, r in fixtures.items()}

    def search(self, question: str) -> dict:
        key = normalize_question(question)
        if key not in self._fixtures:
            return {"results": []}
        return self._fixtures[key]


class HTTPSearchProvider:
    """Live provider: GET {url}?q=<question>, JSON body back."""

    def __init__(self, url: str, timeout_s: float = 10.0, get=None):
        self.url = url
        self.timeout_s = timeout_s
        if get is None:
            import requests

            get = requests.get
        self._get = get

    def search(self, question: str) -> dict:
        try:
            resp = self._get(self.url, params={"q": question}, timeout=self.timeout_s)
            return resp.json()
        except Exception as exc:
            raise SearchUnavailable(str(exc)) from exc


_SQL_FENCE_RE = re.compile(r"^```(?:sql)?\s*|\s*```$", re.I | re.M)


class Toolbox:
    """Routes parsed actions to tools, using the episode's gateway for the
    tool-internal model calls.

    With ``gateway=None`` the toolbox runs in no-LLM mode: the SQL tool
    executes questions that already are SELECT statements and stringifies
    raw rows, and the search tool returns raw provider payloads; this
    supports pure-store integration tests.
    """

    def __init__(
        self,
        store: MemoryStore | None = None,
        gateway: LLMGateway | None = None,
        search_provider: SearchProvider | None = None,
    ):
        self.store = store
        self.gateway = gateway
        self.search_provider = search_provider
        # Every dispatched outcome, for trace audits.
        self.outcomes: list[ToolOutcome] = []

    # -- dispatch -------------------------------------------------------------

    def dispatch(self, action: ActionSpec, context: dict | None = None) -> ToolOutcome:
        if action.tool is Tool.FINISH:
            raise ValueError("Finish is terminal and never dispatched to a tool")
        start = time.perf_counter()
        try:
            if action.tool is Tool.SQL:
                outcome = self.sql_tool(action.argument)
            elif action.tool is Tool.SEARCH:
                outcome = self.search_tool(action.argument)
            else:
                outcome = self.summarize_tool(action.argument)
        except ToolFailure as exc:
            outcome = ToolOutcome(
                observation=f"Error: {exc.category}",
                tool=action.tool,
                raw_intermediate=str(exc) or None,
                duration_ms=(time.perf_counter() - start) * 1000.0,
            )
        self.outcomes.append(outcome)
        return outcome

    def _complete(self, prompt: str, tag: str) -> str:
        # Tool-internal translation calls run deterministic (temperature 0).
        return self.gateway.complete(
            CompletionRequest(prompt=prompt, temperature=0.0, tag=tag)
        ).text

    # -- tools ------------------------------------------------------------------

    def sql_tool(self, question: str) -> ToolOutcome:
        """Question -> SQL -> rows -> sentences, three staged calls."""
        if self.store is None:
            raise SqlExecutionFailed("no store configured")
        start = time.perf_counter()
        database_info = self.store.schema_description().text

        if self.gateway is None:
            sql = self._validate_sql(question)
        else:
            raw_sql = self._complete(
                prompts.TEXT_TO_SQL_TEMPLATE.format(
                    question=question, database_info=database_info
                ),
                "tool.sql.translate",
            )
            sql = self._validate_sql(raw_sql)

        try:
            rows = self.store.execute_readonly(sql)
        except StoreError as exc:
            raise SqlExecutionFailed(str(exc)) from exc
        rendered_rows = repr(rows)

        if self.gateway is None:
            observation = rendered_rows
        else:
            observation = self._complete(
                prompts.SQL_RESULT_TO_TEXT_TEMPLATE.format(
                    question=question, sql_query=sql, sql_result=rendered_rows
                ),
                "tool.sql.render",
            )
        return ToolOutcome(
            observation=clip_observation(observation),
            tool=Tool.SQL,
            raw_intermediate=json.dumps({"sql": sql, "result": rendered_rows}),
            duration_ms=(time.perf_counter() - start) * 1000.0,
        )

    @staticmethod
    def _validate_sql(raw: str) -> str:
        sql = _SQL_FENCE_RE.sub("", raw).strip().rstrip(";").strip()
        if not sql.upper().startswith("SELECT"):
            raise SqlGenerationFailed(f"not a SELECT statement: {sql[:80]!r}")
        if ";" in sql:
            raise SqlGenerationFailed("multiple statements are not allowed")
        return sql

    def search_tool(self, question: str) -> ToolOutcome:
        """Provider lookup, then structured result converted to sentences."""
        if self.search_provider is None:
            raise SearchUnavailable("no search provider configured")
        start = time.perf_counter()
        try:
            payload = self.search_provider.search(question)
        except SearchUnavailable:
            raise
        except Exception as exc:
            raise SearchUnavailable(str(exc)) from exc
        raw = json.dumps(payload, sort_keys=True, ensure_ascii=False)

        if self.gateway is None:
            observation = raw
        else:
            try:
                observation = self._complete(
                    prompts.SEARCH_RESULT_TO_TEXT_TEMPLATE.format(
                        search_result=raw, question=question
                    ),
                    "tool.search.convert",
                )
            except ToolFailure:
                raise
            except Exception as exc:
                raise ConversionFailed(str(exc)) from exc
        return ToolOutcome(
            observation=clip_observation(observation),
            tool=Tool.SEARCH,
            raw_intermediate=raw,
            duration_ms=(time.perf_counter() - start) * 1000.0,
        )

    def summarize_tool(self, content: str) -> ToolOutcome:
        if not content.strip():
            raise EmptyInput("nothing to summarize")
        if self.gateway is None:
            raise ToolFailure("summarization requires a completion backend")
        start = time.perf_counter()
        summary = self._complete(
            prompts.SUMMARIZE_TEMPLATE.format(content=content), "tool.summarize"
        )
        return ToolOutcome(
            observation=clip_observation(summary),
            tool=Tool.SUMMARIZE,
            raw_intermediate=None,
            duration_ms=(time.perf_counter() - start) * 1000.0,
        )
