"""Tool-augmented LLM planning agent and recommendation evaluation harness.

The package wires five layers together: a completion gateway (live,
scripted, cached), a planning engine with four tree-traversal
strategies, a tool suite (SQL over an embedded review store, search,
summarization), a five-task evaluation harness, and exact metric
implementations with table-style report emission.
"""

from .errors import RecAgentError
from .gateway import (
    CompletionCache,
    CompletionRequest,
    CompletionResponse,
    LiveBackend,
    LLMGateway,
    ScriptedBackend,
    ScriptEntry,
    cache_key,
)
from .harness import (
    ExemplarConfig,
    Prediction,
    ShotMode,
    TaskInstance,
    TaskKind,
    build_instances,
    build_prompt,
    parse_prediction,
    sample_negatives,
    split_dataset,
)
from .metrics import MetricReport, bleu_n, hr_ndcg_at_k, rmse_mae, rouge
from .planning import (
    ActionSpec,
    PlannerConfig,
    PlanningEngine,
    PlanState,
    PlanTrace,
    ReasoningPath,
    Strategy,
    Tool,
    parse_step,
    render_context,
)
from .runner import Budgets, RunConfig, run_evaluation
from .store import MemoryStore
from .tools import FixtureSearchProvider, Toolbox, ToolOutcome

__version__ = "0.1.0"

__all__ = [
    "ActionSpec",
    "Budgets",
    "CompletionCache",
    "CompletionRequest",
    "CompletionResponse",
    "ExemplarConfig",
    "FixtureSearchProvider",
    "LiveBackend",
    "LLMGateway",
    "MemoryStore",
    "MetricReport",
    "PlannerConfig",
    "PlanningEngine",
    "PlanState",
    "PlanTrace",
    "Prediction",
    "ReasoningPath",
    "RecAgentError",
    "RunConfig",
    "ScriptEntry",
    "ScriptedBackend",
    "ShotMode",
    "Strategy",
    "TaskInstance",
    "TaskKind",
    "Tool",
    "Toolbox",
    "ToolOutcome",
    "bleu_n",
    "build_instances",
    "build_prompt",
    "cache_key",
    "hr_ndcg_at_k",
    "parse_prediction",
    "parse_step",
    "render_context",
    "rmse_mae",
    "rouge",
    "run_evaluation",
    "sample_negatives",
    "split_dataset",
]
