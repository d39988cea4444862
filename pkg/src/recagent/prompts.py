"""Prompt templates and fill helpers.

Every string the agent ever sends to a completion backend is assembled
here so that prompts are deterministic and the scripted backend can key
on stable phrases. Each call type carries one phrase that appears in no
other template (the *_CUE constants); test scripts rely on those phrases
to route responses by call type.
"""

from __future__ import annotations

from collections.abc import Sequence

# Sentinels ---------------------------------------------------------------

# Thought text that ends planning immediately.
END_OF_PLANNING = "End of Planning"

# Fill for the {empty_response} slot of the inspire prompt; a response
# equal to this (after trimming) means "no alternative branch".
EMPTY_RESPONSE = "No alternative thought."

# Rendered in place of step listings when no steps exist yet.
NO_STEPS = "(no steps yet)"

# Call-type cues ----------------------------------------------------------
# One unique phrase per completion kind. Keep them mutually non-substring.

STEP_CUE = "Decide the next thought and action."
ALT_ACTION_CUE = "Provide the action for this thought."
FINALIZE_CUE = "Produce the final answer to the task."
SAMPLE_CUE = "possible thoughts for the next step"
VOTE_CUE = "decide which choice is most promising"
BRANCH_EVAL_CUE = "one of sure, maybe, or impossible"
INSPIRE_CUE = "alternative thought in the current step"

# Agent preamble ----------------------------------------------------------

AGENT_PREAMBLE_TEMPLATE = (
    "Perform a recommendation task with interleaving Thought, Action, and "
    "Observation steps. Thought can reason about the current situation, and "
    "Action can be the following types:\n"
    "(1) SQLTool[question], which aims to search for the answer to a question "
    "from the database. You can only put forward questions based on the "
    "available information in the database. Available information and schema "
    "of the database is provided in the database info below.\n"
    "(2) SummarizeTool[content], which condenses extensive text into a "
    "shorter version while retaining the core information and meaning by "
    "using a pre-trained text summarization model.\n"
    "(3) SearchTool[question], which formulates a search query for Google "
    "search engine based on the question. This tool can be used to search "
    "for information that is unavailable in the database.\n"
    "(4) Finish[answer], which returns the answer and finishes the task.\n"
    "Database info: {database_info}"
)


def agent_preamble(database_info: str) -> str:
    """Tool-use instruction block placed at the top of every episode prompt."""
    return AGENT_PREAMBLE_TEMPLATE.format(
        database_info=database_info or "(no database configured)"
    )


# Planner call templates ---------------------------------------------------

STEP_TEMPLATE = "{context}\n\n" + STEP_CUE

ALT_ACTION_TEMPLATE = (
    "{context}\n\nThought {label}: {thought}\n\n" + ALT_ACTION_CUE
)

FINALIZE_TEMPLATE = "{context}\n\n" + FINALIZE_CUE + "\nFinal Answer:"

THOUGHT_SAMPLING_TEMPLATE = (
    "Given the previous {previous_steps}, list {n} possible thoughts for the "
    "next step towards finishing the task {task}."
)

DECISION_TEMPLATE = (
    "Given an instruction and several choices, decide which choice is most "
    "promising. Your instruction is {instruction}. Your available options "
    "are {option_list}. Analyze each choice, then conclude in the last "
    "line, 'The best choice is {{s}}', where s is the integer id of the "
    "choice."
)

BRANCH_EVAL_TEMPLATE = (
    "Evaluate whether the current reasoning branch can still finish the "
    "task {task}. The steps so far are {previous_steps}. Conclude in the "
    "last line, 'The branch is {{s}}', where s is " + BRANCH_EVAL_CUE + "."
)

INSPIRE_TEMPLATE = (
    "You are given multi-step problem-solving steps towards finishing the "
    "task {task}. The previous steps are {previous_steps}. You already have "
    "the thought, action, and observation in the current step "
    "{current_step}. Your mission is to decide if there is an "
    + INSPIRE_CUE
    + " that can help finish this task following the previous steps. If "
    "there is, directly output the thought. If not, please respond "
    "{empty_response}"
)

REPROMPT_SUFFIX = (
    "\n\nYour previous response could not be parsed. Answer again in the "
    "required format."
)

_NUMBER_WORDS = {
    2: "two", 3: "three", 4: "four", 5: "five",
    6: "six", 7: "seven", 8: "eight", 9: "nine", 10: "ten",
}


def thought_sampling_prompt(previous_steps: str, task: str, k: int) -> str:
    n = _NUMBER_WORDS.get(k, str(k))
    return THOUGHT_SAMPLING_TEMPLATE.format(
        previous_steps=previous_steps or NO_STEPS, n=n, task=task
    )


def decision_prompt(instruction: str, options: Sequence[str]) -> str:
    numbered = "\n".join(f"{i}. {opt}" for i, opt in enumerate(options, start=1))
    return DECISION_TEMPLATE.format(instruction=instruction, option_list=numbered)


def branch_eval_prompt(task: str, previous_steps: str) -> str:
    return BRANCH_EVAL_TEMPLATE.format(
        task=task, previous_steps=previous_steps or NO_STEPS
    )


def inspire_prompt(task: str, previous_steps: str, current_step: str) -> str:
    return INSPIRE_TEMPLATE.format(
        task=task,
        previous_steps=previous_steps or NO_STEPS,
        current_step=current_step,
        empty_response=EMPTY_RESPONSE,
    )


# Tool-internal templates --------------------------------------------------

TEXT_TO_SQL_TEMPLATE = (
    "Your mission is to convert SQL query from given {question}. The "
    "information about the tables in the database is {database_info}. Only "
    "output the SQL query."
)

SQL_RESULT_TO_TEXT_TEMPLATE = (
    "Your mission is to convert SQL query execution results to meaningful "
    "sentences, which should be the answer to the question {question}. The "
    "query generated for this question is {sql_query}. Here is the database "
    "result: {sql_result}"
)

SEARCH_RESULT_TO_TEXT_TEMPLATE = (
    "Your mission is to convert the Google search result {search_result} "
    "from search engine to meaningful sentences, which can be a response to "
    "question {question}."
)

SUMMARIZE_TEMPLATE = (
    "Condense the following text into a shorter version while retaining the "
    "core information and meaning:\n{content}"
)

# Task questions -----------------------------------------------------------

RATING_QUESTION_TEMPLATE = (
    "Predict the rating that user {user_id} would give to the item "
    "'{item_title}'. The rating should be a number between 1 and 5."
)

DIRECT_REC_QUESTION_TEMPLATE = (
    "From the item candidates listed, choose the top 10 items to recommend "
    "to the user {user_id} and rank them in order of priority from highest "
    "to lowest. Candidates: {candidates}"
)

SEQUENTIAL_REC_QUESTION_TEMPLATE = (
    "user {user_id} has interacted with the following items in "
    "chronological order: {history}. Please recommend the next item that "
    "the user might interact with. Choose the top 10 products to recommend "
    "in order of priority, from highest to lowest."
)

EXPLANATION_QUESTION_TEMPLATE = (
    "Write a short explanation that justifies why user {user_id} would "
    "interact with the item '{item_title}'."
)

SUMMARIZATION_QUESTION_TEMPLATE = (
    "Summarize the following review from user {user_id} into a short review "
    "title. Review: {review}"
)


def render_title_list(titles: Sequence[str]) -> str:
    """Quoted, bracketed title list as it appears in task questions."""
    return "[" + ", ".join("'" + t.replace("'", "\\'") + "'" for t in titles) + "]"
