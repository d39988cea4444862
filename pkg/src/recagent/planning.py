"""Planning strategies over a latent reasoning tree.

Four traversals share one state vocabulary (thought, action,
observation):

* ``run_cot``   — one path, extended until Finish, the end-of-planning
  sentinel, or the step budget.
* ``run_tot``   — BFS: per step, sample k candidate steps in one call and
  keep the voted winner; DFS: extend one branch, and on an "impossible"
  verdict move the tip to ``pruned_states``, backtrack one state, and
  branch anew. Context and finalization see only the surviving chain.
* ``run_si``    — self-inspiring: after each retained step, an inspire
  call may propose an alternative thought; the alternative is executed
  as a sibling state on a new path, both states are retained, and the
  step counter is charged twice. Nothing is ever discarded, and every
  prompt (including finalization) is conditioned on all retained paths.

Budget accounting: ``steps_used`` counts step-generation completions
(one per retained or pruned state, two per self-inspired branch) and
never exceeds the budget; episodes that do not end in Finish issue
exactly one finalization completion.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol

from . import prompts
from .errors import InspireUnparseable, MalformedStep, VoteUnparseable
from .gateway import CompletionRequest, LLMGateway


class Strategy(str, Enum):
    COT = "CoT"
    TOT_BFS = "ToT_BFS"
    TOT_DFS = "ToT_DFS"
    SI = "SI"


class Tool(str, Enum):
    SQL = "SQLTool"
    SEARCH = "SearchTool"
    SUMMARIZE = "SummarizeTool"
    FINISH = "Finish"


_TOOL_ALIASES = {
    "sqltool": Tool.SQL, "sql": Tool.SQL,
    "searchtool": Tool.SEARCH, "search": Tool.SEARCH,
    "summarizetool": Tool.SUMMARIZE, "summarize": Tool.SUMMARIZE,
    "finish": Tool.FINISH,
}


@dataclass(frozen=True)
class ActionSpec:
    tool: Tool
    argument: str

    def __post_init__(self) -> None:
        if self.tool is not Tool.FINISH and not self.argument:
            raise ValueError(f"{self.tool.value} requires a non-empty argument")

    def render(self) -> str:
        return f"{self.tool.value}[{self.argument}]"


@dataclass(eq=False)
class PlanState:
    """One reasoning step: path position plus (thought, action, observation)."""

    path_id: int
    step_index: int
    thought: str
    action: ActionSpec
    observation: str | None = None
    parent: "PlanState | None" = field(default=None, repr=False)

    def signature(self) -> tuple:
        return (self.step_index, self.thought, self.action.tool.value,
                self.action.argument, self.observation)


@dataclass
class ReasoningPath:
    path_id: int
    states: list[PlanState] = field(default_factory=list)
    # (path_id, step_index) of the state this path diverged after.
    branch_point: tuple[int, int] | None = None


@dataclass
class PlanTrace:
    problem: str
    strategy: Strategy
    step_budget: int
    paths: list[ReasoningPath] = field(default_factory=list)
    steps_used: int = 0
    final_answer: str | None = None
    pruned_states: list[PlanState] = field(default_factory=list)

    def path_by_id(self, path_id: int) -> ReasoningPath:
        for path in self.paths:
            if path.path_id == path_id:
                return path
        raise KeyError(path_id)

    def all_states(self) -> list[PlanState]:
        """Retained states grouped by path in exploration order."""
        return [s for p in self.paths for s in p.states]

    def resolved_chain(self, path: ReasoningPath) -> list[PlanState]:
        """Full root-to-tip chain of a path, following branch points."""
        if path.branch_point is None:
            prefix: list[PlanState] = []
        else:
            ancestor_id, step = path.branch_point
            ancestor = self.path_by_id(ancestor_id)
            prefix = [s for s in self.resolved_chain(ancestor) if s.step_index <= step]
        return prefix + path.states

    def surviving_chain(self) -> list[PlanState]:
        return self.resolved_chain(self.paths[-1]) if self.paths else []


# -- step parsing -----------------------------------------------------------

_THOUGHT_RE = re.compile(
    r"Thought(?:\s+\d+(?:\s*\(\d+\))?)?\s*:\s*(.*?)(?=\n\s*Action(?:\s+\d+(?:\s*\(\d+\))?)?\s*:|\Z)",
    re.S,
)
_ACTION_RE = re.compile(
    r"Action(?:\s+\d+(?:\s*\(\d+\))?)?\s*:\s*(.*)", re.S
)
_DIRECTIVE_RE = re.compile(r"([A-Za-z_]+)\s*\[(.*)\]", re.S)


def _extract_thought(raw: str) -> str | None:
    match = _THOUGHT_RE.search(raw)
    return match.group(1).strip() if match else None


def is_end_of_planning(raw: str) -> bool:
    thought = _extract_thought(raw)
    return (thought if thought is not None else raw).strip() == prompts.END_OF_PLANNING


def parse_action_directive(text: str) -> ActionSpec:
    """Parse ``ToolName[argument]``; unknown tool names are rejected here."""
    match = _DIRECTIVE_RE.search(text)
    if not match:
        raise MalformedStep(f"no ToolName[argument] directive in {text!r}")
    name, argument = match.group(1), match.group(2).strip()
    tool = _TOOL_ALIASES.get(name.lower())
    if tool is None:
        raise MalformedStep(f"unknown tool name {name!r}")
    try:
        return ActionSpec(tool=tool, argument=argument)
    except ValueError as exc:
        raise MalformedStep(str(exc)) from exc


def parse_step(raw: str) -> tuple[str, ActionSpec]:
    """Extract the first Thought block and the first Action directive."""
    thought = _extract_thought(raw)
    if thought is None or not thought:
        raise MalformedStep(f"no Thought block in {raw!r}")
    action_match = _ACTION_RE.search(raw)
    if not action_match:
        raise MalformedStep(f"no Action directive in {raw!r}")
    return thought, parse_action_directive(action_match.group(1))


# -- rendering ---------------------------------------------------------------

def compute_labels(states: list[PlanState]) -> dict[int, str]:
    """Step labels: plain index, or "t (b)" where a step holds siblings."""
    by_step: dict[int, list[PlanState]] = {}
    for state in states:
        by_step.setdefault(state.step_index, []).append(state)
    labels: dict[int, str] = {}
    for step, group in by_step.items():
        if len(group) == 1:
            labels[id(group[0])] = str(step)
        else:
            for ordinal, state in enumerate(
                sorted(group, key=lambda s: s.path_id), start=1
            ):
                labels[id(state)] = f"{step} ({ordinal})"
    return labels


def render_state_block(state: PlanState, label: str, marker: str = "") -> str:
    lines = [
        f"Thought {label}{marker}: {state.thought}",
        f"Action {label}{marker}: {state.action.render()}",
    ]
    if state.observation is not None:
        lines.append(f"Observation {label}{marker}: {state.observation}")
    return "\n".join(lines)


def render_states(states: list[PlanState], labels: dict[int, str] | None = None) -> str:
    if not states:
        return prompts.NO_STEPS
    if labels is None:
        labels = compute_labels(states)
    return "\n".join(render_state_block(s, labels[id(s)]) for s in states)


_VIEW_FOR_STRATEGY = {
    Strategy.COT: "cot",
    Strategy.TOT_BFS: "tot",
    Strategy.TOT_DFS: "tot",
    Strategy.SI: "si",
}


def view_states(trace: PlanTrace, view: str) -> list[PlanState]:
    if view in ("cot", "si"):
        return trace.all_states()
    if view == "tot":
        return trace.surviving_chain()
    if view == "full":
        pruned_by_path: dict[int, list[PlanState]] = {}
        for state in trace.pruned_states:
            pruned_by_path.setdefault(state.path_id, []).append(state)
        out: list[PlanState] = []
        for path in trace.paths:
            out.extend(path.states)
            out.extend(sorted(pruned_by_path.get(path.path_id, ()),
                              key=lambda s: s.step_index))
        return out
    raise ValueError(f"unknown view {view!r}")


def render_context(trace: PlanTrace, view: str | None = None) -> str:
    """Deterministic serialization: problem, then state blocks per view."""
    if view is None:
        view = _VIEW_FOR_STRATEGY[trace.strategy]
    states = view_states(trace, view)
    pruned = set(map(id, trace.pruned_states))
    header = f"Task: {trace.problem}"
    if not states:
        return header
    labels = compute_labels(states)
    blocks = [
        render_state_block(s, labels[id(s)],
                           marker=" [pruned]" if id(s) in pruned else "")
        for s in states
    ]
    return header + "\n\n" + "\n".join(blocks)


def trace_records(trace: PlanTrace) -> list[dict]:
    """One record per state (retained paths in order, pruned flagged last)."""
    records = []
    for path in trace.paths:
        for state in path.states:
            records.append({
                "path_id": state.path_id,
                "step_index": state.step_index,
                "thought": state.thought,
                "action": state.action.render(),
                "observation": state.observation,
                "pruned": False,
            })
    for state in trace.pruned_states:
        records.append({
            "path_id": state.path_id,
            "step_index": state.step_index,
            "thought": state.thought,
            "action": state.action.render(),
            "observation": state.observation,
            "pruned": True,
        })
    return records


def dump_trace(trace: PlanTrace) -> str:
    """Golden-trace serialization: one JSON record per state, newline-joined."""
    return "\n".join(json.dumps(r, sort_keys=True, ensure_ascii=False)
                     for r in trace_records(trace))


def trace_to_dict(trace: PlanTrace) -> dict:
    return {
        "problem": trace.problem,
        "strategy": trace.strategy.value,
        "step_budget": trace.step_budget,
        "steps_used": trace.steps_used,
        "final_answer": trace.final_answer,
        "paths": [
            {
                "path_id": p.path_id,
                "branch_point": list(p.branch_point) if p.branch_point else None,
                "states": [
                    {
                        "step_index": s.step_index,
                        "thought": s.thought,
                        "tool": s.action.tool.value,
                        "argument": s.action.argument,
                        "observation": s.observation,
                    }
                    for s in p.states
                ],
            }
            for p in trace.paths
        ],
        "pruned_states": [
            {
                "path_id": s.path_id,
                "step_index": s.step_index,
                "thought": s.thought,
                "tool": s.action.tool.value,
                "argument": s.action.argument,
                "observation": s.observation,
            }
            for s in trace.pruned_states
        ],
    }


def trace_from_dict(data: dict) -> PlanTrace:
    trace = PlanTrace(
        problem=data["problem"],
        strategy=Strategy(data["strategy"]),
        step_budget=data["step_budget"],
        steps_used=data["steps_used"],
        final_answer=data["final_answer"],
    )
    for pdata in data["paths"]:
        path = ReasoningPath(
            path_id=pdata["path_id"],
            branch_point=tuple(pdata["branch_point"]) if pdata["branch_point"] else None,
        )
        for sdata in pdata["states"]:
            path.states.append(PlanState(
                path_id=pdata["path_id"],
                step_index=sdata["step_index"],
                thought=sdata["thought"],
                action=ActionSpec(Tool(sdata["tool"]), sdata["argument"]),
                observation=sdata["observation"],
            ))
        trace.paths.append(path)
    for sdata in data["pruned_states"]:
        trace.pruned_states.append(PlanState(
            path_id=sdata["path_id"],
            step_index=sdata["step_index"],
            thought=sdata["thought"],
            action=ActionSpec(Tool(sdata["tool"]), sdata["argument"]),
            observation=sdata["observation"],
        ))
    return trace


# -- engine -------------------------------------------------------------------

class ToolDispatcher(Protocol):
    def dispatch(self, action: ActionSpec, context: dict | None = None): ...


@dataclass
class PlannerConfig:
    step_budget: int = 15          # T
    bfs_candidates: int = 5        # k
    max_prunes: int = 2
    step_temperature: float = 0.7
    decision_temperature: float = 0.0
    max_output_tokens: int = 512


_VERDICT_RE = re.compile(r"\b(sure|maybe|impossible)\b", re.I)
_CHOICE_RE = re.compile(r"The best choice is\s*(\d+)", re.I)
_CANDIDATE_SPLIT_RE = re.compile(r"^\s*\d+[.)]\s*", re.M)


class PlanningEngine:
    """Runs episodes against a gateway, producing fully recorded traces."""

    def __init__(self, gateway: LLMGateway, config: PlannerConfig | None = None):
        self.gateway = gateway
        self.config = config or PlannerConfig()

    # helpers ---------------------------------------------------------------

    def _complete(self, prompt: str, tag: str, temperature: float) -> str:
        return self.gateway.complete(CompletionRequest(
            prompt=prompt,
            temperature=temperature,
            max_output_tokens=self.config.max_output_tokens,
            tag=tag,
        )).text

    def _sample_step(self, prompt: str, tag: str) -> tuple[str, ActionSpec] | None:
        """One step completion; None means the end-of-planning sentinel."""
        raw = self._complete(prompt, tag, self.config.step_temperature)
        if is_end_of_planning(raw):
            return None
        try:
            return parse_step(raw)
        except MalformedStep:
            raw = self._complete(prompt + prompts.REPROMPT_SUFFIX, tag,
                                 self.config.step_temperature)
            if is_end_of_planning(raw):
                return None
            return parse_step(raw)

    def _execute(self, action: ActionSpec, toolbox: ToolDispatcher) -> str:
        return toolbox.dispatch(action).observation

    def _finalize(self, trace: PlanTrace, view: str) -> str:
        prompt = prompts.FINALIZE_TEMPLATE.format(context=render_context(trace, view))
        return self._complete(prompt, "planner.finalize",
                              self.config.decision_temperature).strip()

    def _step_prompt(self, trace: PlanTrace, view: str) -> str:
        return prompts.STEP_TEMPLATE.format(context=render_context(trace, view))

    @staticmethod
    def _new_state(path: ReasoningPath, parent: PlanState | None,
                   thought: str, action: ActionSpec) -> PlanState:
        return PlanState(
            path_id=path.path_id,
            step_index=(parent.step_index + 1) if parent else 1,
            thought=thought,
            action=action,
            parent=parent,
        )

    # strategies --------------------------------------------------------------

    def run_cot(self, problem: str, budget: int | None = None,
                toolbox: ToolDispatcher | None = None) -> PlanTrace:
        """Single-path planning: each step conditioned on all prior steps."""
        budget = budget or self.config.step_budget
        trace = PlanTrace(problem=problem, strategy=Strategy.COT, step_budget=budget)
        path = ReasoningPath(path_id=1)
        trace.paths.append(path)

        while trace.steps_used < budget:
            sampled = self._sample_step(self._step_prompt(trace, "cot"), "planner.step")
            if sampled is None:
                break
            thought, action = sampled
            trace.steps_used += 1
            parent = path.states[-1] if path.states else None
            state = self._new_state(path, parent, thought, action)
            if action.tool is Tool.FINISH:
                path.states.append(state)
                trace.final_answer = action.argument
                return trace
            state.observation = self._execute(action, toolbox)
            path.states.append(state)

        trace.final_answer = self._finalize(trace, "cot")
        return trace

    def run_tot(self, problem: str, budget: int | None = None,
                toolbox: ToolDispatcher | None = None, mode: str = "DFS",
                k: int | None = None) -> PlanTrace:
        if mode.upper() == "BFS":
            return self._run_tot_bfs(problem, budget, toolbox, k)
        if mode.upper() == "DFS":
            return self._run_tot_dfs(problem, budget, toolbox)
        raise ValueError(f"unknown mode {mode!r}")

    def _run_tot_bfs(self, problem: str, budget: int | None,
                     toolbox: ToolDispatcher | None, k: int | None) -> PlanTrace:
        """Per step: sample k candidate steps in one call, keep the voted one."""
        budget = budget or self.config.step_budget
        k = k or self.config.bfs_candidates
        if k < 2:
            raise ValueError("BFS needs k >= 2 candidates")
        trace = PlanTrace(problem=problem, strategy=Strategy.TOT_BFS, step_budget=budget)
        path = ReasoningPath(path_id=1)
        trace.paths.append(path)

        while trace.steps_used < budget:
            previous = render_states(path.states)
            sample_prompt = prompts.thought_sampling_prompt(previous, problem, k)
            raw = self._complete(sample_prompt, "planner.sample",
                                 self.config.step_temperature)
            trace.steps_used += 1
            candidates = self._parse_candidates(raw)
            if not candidates:
                raw = self._complete(sample_prompt + prompts.REPROMPT_SUFFIX,
                                     "planner.sample", self.config.step_temperature)
                candidates = self._parse_candidates(raw)
                if not candidates:
                    raise MalformedStep("no parseable candidate steps in sampling response")
            choice = self._vote(problem, candidates)
            thought, action = candidates[choice - 1]
            if thought.strip() == prompts.END_OF_PLANNING:
                break
            parent = path.states[-1] if path.states else None
            state = self._new_state(path, parent, thought, action)
            if action.tool is Tool.FINISH:
                path.states.append(state)
                trace.final_answer = action.argument
                return trace
            state.observation = self._execute(action, toolbox)
            path.states.append(state)

        trace.final_answer = self._finalize(trace, "tot")
        return trace

    @staticmethod
    def _parse_candidates(raw: str) -> list[tuple[str, ActionSpec]]:
        blocks = [b for b in _CANDIDATE_SPLIT_RE.split(raw) if b.strip()]
        candidates = []
        for block in blocks:
            try:
                candidates.append(parse_step(block))
            except MalformedStep:
                if block.strip() == prompts.END_OF_PLANNING:
                    candidates.append((prompts.END_OF_PLANNING,
                                       ActionSpec(Tool.FINISH, "")))
        return candidates

    def _vote(self, problem: str, candidates: list[tuple[str, ActionSpec]]) -> int:
        options = [f"Thought: {t}\nAction: {a.render()}" for t, a in candidates]
        prompt = prompts.decision_prompt(problem, options)
        raw = self._complete(prompt, "planner.vote", self.config.decision_temperature)
        choice = self._parse_choice(raw, len(candidates))
        if choice is None:
            raw = self._complete(prompt + prompts.REPROMPT_SUFFIX, "planner.vote",
                                 self.config.decision_temperature)
            choice = self._parse_choice(raw, len(candidates))
            if choice is None:
                raise VoteUnparseable(f"no usable 'The best choice is' line in {raw!r}")
        return choice

    @staticmethod
    def _parse_choice(raw: str, n: int) -> int | None:
        matches = _CHOICE_RE.findall(raw)
        if not matches:
            return None
        choice = int(matches[-1])
        return choice if 1 <= choice <= n else None

    def _run_tot_dfs(self, problem: str, budget: int | None,
                     toolbox: ToolDispatcher | None) -> PlanTrace:
        """One branch at a time; an "impossible" verdict prunes the tip and
        backtracks one state, and later prompts exclude the pruned state."""
        budget = budget or self.config.step_budget
        trace = PlanTrace(problem=problem, strategy=Strategy.TOT_DFS, step_budget=budget)
        current = ReasoningPath(path_id=1)
        trace.paths.append(current)
        prunes = 0

        while trace.steps_used < budget:
            sampled = self._sample_step(self._step_prompt(trace, "tot"), "planner.step")
            if sampled is None:
                break
            thought, action = sampled
            trace.steps_used += 1
            chain = trace.resolved_chain(current)
            parent = chain[-1] if chain else None
            state = self._new_state(current, parent, thought, action)
            if action.tool is Tool.FINISH:
                current.states.append(state)
                trace.final_answer = action.argument
                return trace
            state.observation = self._execute(action, toolbox)
            current.states.append(state)

            verdict = self._branch_eval(problem, trace)
            if verdict == "impossible" and prunes < self.config.max_prunes:
                prunes += 1
                trace.pruned_states.append(current.states.pop())
                branch_point = ((parent.path_id, parent.step_index)
                                if parent is not None else None)
                current = ReasoningPath(path_id=len(trace.paths) + 1,
                                        branch_point=branch_point)
                trace.paths.append(current)

        trace.final_answer = self._finalize(trace, "tot")
        return trace

    def _branch_eval(self, problem: str, trace: PlanTrace) -> str:
        previous = render_states(trace.surviving_chain())
        prompt = prompts.branch_eval_prompt(problem, previous)
        raw = self._complete(prompt, "planner.eval", self.config.decision_temperature)
        verdict = self._parse_verdict(raw)
        if verdict is None:
            raw = self._complete(prompt + prompts.REPROMPT_SUFFIX, "planner.eval",
                                 self.config.decision_temperature)
            verdict = self._parse_verdict(raw)
            if verdict is None:
                raise VoteUnparseable(f"no sure/maybe/impossible verdict in {raw!r}")
        return verdict

    @staticmethod
    def _parse_verdict(raw: str) -> str | None:
        matches = _VERDICT_RE.findall(raw)
        return matches[-1].lower() if matches else None

    def run_si(self, problem: str, budget: int | None = None,
               toolbox: ToolDispatcher | None = None) -> PlanTrace:
        """Self-inspiring planning.

        Loop: sample the next step conditioned on every retained state;
        stop on the end-of-planning sentinel; otherwise ask inspire
        whether an alternative thought exists for this step. If it does,
        sample the alternative's action conditioned on the pre-extension
        history, execute it, retain both sibling states (charging two
        steps), and continue on the new branch. The final answer is
        conditioned on all retained paths in creation order.
        """
        budget = budget or self.config.step_budget
        trace = PlanTrace(problem=problem, strategy=Strategy.SI, step_budget=budget)
        current = ReasoningPath(path_id=1)
        trace.paths.append(current)

        while trace.steps_used < budget:
            sampled = self._sample_step(self._step_prompt(trace, "si"), "planner.step")
            if sampled is None:
                break
            thought, action = sampled
            trace.steps_used += 1
            parent = current.states[-1] if current.states else self._branch_parent(trace, current)
            state = self._new_state(current, parent, thought, action)
            if action.tool is Tool.FINISH:
                current.states.append(state)
                trace.final_answer = action.argument
                return trace
            pre_extension = trace.all_states()
            state.observation = self._execute(action, toolbox)
            current.states.append(state)

            # No room to charge an alternative on the last budgeted step.
            if trace.steps_used >= budget:
                continue
            alternative = self.inspire(problem, trace, state)
            if alternative is None:
                continue
            alt_action = self._alternative_action(
                problem, pre_extension, state, alternative)
            trace.steps_used += 1
            new_path = ReasoningPath(
                path_id=len(trace.paths) + 1,
                branch_point=(parent.path_id, parent.step_index) if parent else None,
            )
            alt_state = PlanState(
                path_id=new_path.path_id,
                step_index=state.step_index,
                thought=alternative,
                action=alt_action,
                parent=parent,
            )
            if alt_action.tool is not Tool.FINISH:
                alt_state.observation = self._execute(alt_action, toolbox)
            new_path.states.append(alt_state)
            trace.paths.append(new_path)
            current = new_path

        trace.final_answer = self._finalize(trace, "si")
        return trace

    @staticmethod
    def _branch_parent(trace: PlanTrace, path: ReasoningPath) -> PlanState | None:
        if path.branch_point is None:
            return None
        ancestor_id, step = path.branch_point
        for state in trace.path_by_id(ancestor_id).states:
            if state.step_index == step:
                return state
        return None

    def inspire(self, problem: str, trace: PlanTrace, current: PlanState) -> str | None:
        """Ask whether this step has an alternative thought.

        Returns None on the empty-response sentinel (trimmed match),
        otherwise the proposed alternative thought text.
        """
        snapshot = trace.all_states()
        labels = compute_labels(snapshot)
        previous = [s for s in snapshot if s is not current]
        prompt = prompts.inspire_prompt(
            task=problem,
            previous_steps=render_states(previous, labels) if previous else "",
            current_step=render_state_block(current, labels[id(current)]),
        )
        raw = self._complete(prompt, "planner.inspire", self.config.step_temperature)
        text = raw.strip()
        if text == prompts.EMPTY_RESPONSE:
            return None
        if not text:
            raw = self._complete(prompt + prompts.REPROMPT_SUFFIX, "planner.inspire",
                                 self.config.step_temperature)
            text = raw.strip()
            if text == prompts.EMPTY_RESPONSE:
                return None
            if not text:
                raise InspireUnparseable("inspire response neither sentinel nor thought")
        return text

    def _alternative_action(self, problem: str, pre_extension: list[PlanState],
                            sibling: PlanState, thought: str) -> ActionSpec:
        labels = compute_labels(pre_extension + [sibling])
        sibling_label = labels[id(sibling)]
        # The sibling occupies ordinal 1 or is unlabeled; the alternative
        # is the next ordinal at the same depth.
        ordinal = 2 if "(" not in sibling_label else int(
            sibling_label.split("(")[1].rstrip(")")) + 1
        label = f"{sibling.step_index} ({ordinal})"
        context = (f"Task: {problem}\n\n" + render_states(pre_extension, labels)
                   if pre_extension else f"Task: {problem}")
        prompt = prompts.ALT_ACTION_TEMPLATE.format(
            context=context, label=label, thought=thought)
        raw = self._complete(prompt, "planner.step.alt", self.config.step_temperature)
        try:
            return parse_action_directive(raw)
        except MalformedStep:
            raw = self._complete(prompt + prompts.REPROMPT_SUFFIX, "planner.step.alt",
                                 self.config.step_temperature)
            return parse_action_directive(raw)

    def run(self, strategy: Strategy, problem: str, budget: int | None = None,
            toolbox: ToolDispatcher | None = None) -> PlanTrace:
        if strategy is Strategy.COT:
            return self.run_cot(problem, budget, toolbox)
        if strategy is Strategy.TOT_BFS:
            return self.run_tot(problem, budget, toolbox, mode="BFS")
        if strategy is Strategy.TOT_DFS:
            return self.run_tot(problem, budget, toolbox, mode="DFS")
        if strategy is Strategy.SI:
            return self.run_si(problem, budget, toolbox)
        raise ValueError(f"unknown strategy {strategy!r}")
