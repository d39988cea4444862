"""Exception hierarchy shared across the package.

Tool errors deliberately carry their class name into planner-visible
observations ("Error: <category>"), so class names are part of the
contract and should not be renamed casually.
"""

from __future__ import annotations


class RecAgentError(Exception):
    """Base class for all package errors."""

    @property
    def category(self) -> str:
        return type(self).__name__


# gateway

class GatewayError(RecAgentError):
    pass


class BackendUnavailable(GatewayError):
    """Live backend unreachable after bounded retries."""


class ScriptExhausted(GatewayError):
    """Scripted backend has no (remaining) entry matching the prompt."""


class BudgetExceeded(GatewayError):
    """Per-episode completion-call budget reached."""


# planning

class PlanningError(RecAgentError):
    pass


class MalformedStep(PlanningError):
    """Planner output unparseable after one reprompt."""


class VoteUnparseable(PlanningError):
    """Voting/evaluation response lacks the expected verdict pattern."""


class InspireUnparseable(PlanningError):
    """Inspire response is neither the empty sentinel nor a thought."""


# tools

class ToolFailure(RecAgentError):
    pass


class SqlGenerationFailed(ToolFailure):
    """Stage-1 output is not a single read-only SELECT."""


class SqlExecutionFailed(ToolFailure):
    pass


class SearchUnavailable(ToolFailure):
    pass


class ConversionFailed(ToolFailure):
    pass


class EmptyInput(ToolFailure):
    """Empty input where content is required (also used by metrics)."""


# memory store

class StoreError(RecAgentError):
    pass


class UnreadableFile(StoreError):
    pass


class NotReadOnly(StoreError):
    """Query is not a single SELECT statement."""


class QuerySyntaxError(StoreError):
    pass


# task harness

class HarnessError(RecAgentError):
    pass


class InsufficientItems(HarnessError):
    """Not enough never-interacted items to sample negatives from."""


# metrics

class EmptyReference(RecAgentError):
    """Reference text tokenizes to nothing."""


# runner / cli

class ConfigError(RecAgentError):
    pass


class UnknownEpisode(RecAgentError):
    pass
