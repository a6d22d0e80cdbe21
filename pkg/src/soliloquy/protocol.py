"""Wire schemas emitted by the tutor model and parsers from raw model text.

Every structured reply the engine expects -- the calculation decision, the
generated code block, the six-field tutor turn, and the enriched solution --
is parsed here into a typed record. Parsing is lenient about surrounding
prose and code fences but strict about field values: a parser either returns
a record satisfying its invariants or raises a typed error, never a partial
record. All functions are pure and safe for concurrent use.
"""

from __future__ import annotations

import json
import keyword
import re
from dataclasses import dataclass
from enum import Enum

# Exact wire field names. These are the contract with the prompt templates;
# see docs/protocol.md.
USE_PYTHON_KEY = "Use Python"
DESCRIPTION_KEY = "Description"
PYTHON_KEY = "Python"
PYTHON_CODE_KEY = "Python Code"
RESULT_VARIABLE_KEY = "Result Variable"
THOUGHTS_KEY = "Thoughts of Tutorbot"
EVALUATION_KEY = "Evaluation of Student Response"
ACTION_KEY = "Action Based on Evaluation"
STEP_NUMBER_KEY = "Step Number"
STEP_STATE_KEY = "Step State"
RESPONSE_KEY = "Tutorbot Response"
DETAILED_SOLUTION_KEY = "Detailed Solution"
SOLUTION_OUTLINE_KEY = "Solution Outline"

STEP_ONE_MARKER = "Step 1)"


class OutputParseError(Exception):
    """Base class for model-output parse failures; carries a reason string."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class MalformedOutput(OutputParseError):
    """No parseable object with the expected fields was found in the reply."""


class MissingDescription(OutputParseError):
    def __init__(self):
        super().__init__('"Use Python" is "y" but no calculation description was given')


class ForbiddenConstruct(OutputParseError):
    def __init__(self, construct: str):
        super().__init__(f"generated code calls {construct}(), which is not allowed")
        self.construct = construct


class EmptyResultVariables(OutputParseError):
    def __init__(self):
        super().__init__('"Result Variable" names no variables')


class InconsistentAction(OutputParseError):
    def __init__(self, evaluation: "EvaluationCode", action: int):
        super().__init__(
            f"action {action} is not permitted for evaluation {evaluation.value!r}"
        )
        self.evaluation = evaluation
        self.action = action


class MissingStepNumbering(OutputParseError):
    def __init__(self, field_name: str):
        super().__init__(f"{field_name!r} does not contain {STEP_ONE_MARKER!r}")
        self.field_name = field_name


class EvaluationCode(str, Enum):
    """Classification of the student's latest response."""

    INCORRECT = "a"
    CORRECT = "b"
    PARTIALLY_CORRECT = "c"
    UNCLEAR = "d"
    OFF_TOPIC = "e"
    INQUIRY = "f"
    NOT_APPLICABLE = "g"


class StepState(str, Enum):
    """Progress marker reported by the tutor for the current solution step."""

    NOT_APPLICABLE = "p"
    IN_PROGRESS = "q"
    STEP_FINISHED = "r"
    PROBLEM_FINISHED = "t"


# Which action codes each evaluation code permits. Exactly 12 of the
# 7 x 12 = 84 combinations are valid.
ACTIONS_BY_EVALUATION: dict[EvaluationCode, frozenset[int]] = {
    EvaluationCode.INCORRECT: frozenset({1, 2}),
    EvaluationCode.CORRECT: frozenset({3}),
    EvaluationCode.PARTIALLY_CORRECT: frozenset({4, 5}),
    EvaluationCode.UNCLEAR: frozenset({6}),
    EvaluationCode.OFF_TOPIC: frozenset({7}),
    EvaluationCode.INQUIRY: frozenset({8, 9, 10, 11}),
    EvaluationCode.NOT_APPLICABLE: frozenset({12}),
}

ACTION_RANGE = range(1, 13)


def validate_action(evaluation: EvaluationCode, action: int) -> bool:
    """True iff ``action`` lies in the permitted set for ``evaluation``."""
    return action in ACTIONS_BY_EVALUATION[evaluation]


@dataclass(frozen=True)
class Decision:
    """The tutor's call on whether the next response needs a calculation."""

    use_python: bool
    description: str | None = None

    def __post_init__(self):
        if self.use_python and not self.description:
            raise MissingDescription()
        if not self.use_python and self.description is not None:
            raise ValueError("description must be absent when use_python is false")


@dataclass(frozen=True)
class CodeArtifact:
    """Executable calculation code plus the variables holding its results."""

    code: str
    result_variables: tuple[str, ...]

    def __post_init__(self):
        if not self.result_variables:
            raise EmptyResultVariables()
        for name in self.result_variables:
            if not name.isidentifier() or keyword.iskeyword(name):
                raise MalformedOutput(f"result variable {name!r} is not a valid identifier")
        construct = find_forbidden_call(self.code)
        if construct is not None:
            raise ForbiddenConstruct(construct)


@dataclass(frozen=True)
class TutorTurn:
    """One full tutor output: private reasoning fields plus the visible response.

    ``response`` is the only field ever shown to the student.
    """

    thoughts: str
    evaluation: EvaluationCode
    action: int
    step_number: str
    step_state: StepState
    response: str

    def __post_init__(self):
        if not validate_action(self.evaluation, self.action):
            raise InconsistentAction(self.evaluation, self.action)
        if not self.response:
            raise MalformedOutput("tutor response must be non-empty")


@dataclass(frozen=True)
class EnrichedSolution:
    """A step-numbered teaching narrative plus its concise outline."""

    detailed: str
    outline: str

    def __post_init__(self):
        if STEP_ONE_MARKER not in self.detailed:
            raise MissingStepNumbering(DETAILED_SOLUTION_KEY)
        if STEP_ONE_MARKER not in self.outline:
            raise MissingStepNumbering(SOLUTION_OUTLINE_KEY)


_DECODER = json.JSONDecoder()


def iter_json_objects(raw: str):
    """Yield every balanced JSON object found in ``raw``, leftmost first.

    Model replies routinely wrap the requested JSON in prose or code fences,
    so we scan rather than requiring the whole string to parse.
    """
    for match in re.finditer(r"\{", raw):
        try:
            obj, _ = _DECODER.raw_decode(raw, match.start())
        except ValueError:
            continue
        if isinstance(obj, dict):
            yield obj


_FENCE = re.compile(r"```[ \t]*(?:python\b)?[ \t]*\r?\n?(.*?)```", re.DOTALL | re.IGNORECASE)


def strip_code_fence(text: str) -> str:
    """Return the interior of a backtick fence, dropping the language keyword.

    The single newline separating the opening fence from the code and the one
    preceding the closing fence are part of the fence, not the code. Text
    without a fence is returned stripped of surrounding whitespace.
    """
    match = _FENCE.search(text)
    if match is None:
        return text.strip()
    interior = match.group(1)
    if interior.endswith("\n"):
        interior = interior[:-1]
    return interior


_FORBIDDEN_CALL = re.compile(r"\b(input|print)[ \t]*\(")


def find_forbidden_call(code: str) -> str | None:
    """Name of the first input()/print() call outside strings and comments, else None."""
    segments: list[str] = []
    i, n = 0, len(code)
    while i < n:
        char = code[i]
        if char in "'\"":
            if code[i : i + 3] == char * 3:
                end = code.find(char * 3, i + 3)
                i = n if end < 0 else end + 3
            else:
                i += 1
                while i < n and code[i] not in (char, "\n"):
                    i += 2 if code[i] == "\\" else 1
                i += 1
        elif char == "#":
            end = code.find("\n", i)
            i = n if end < 0 else end
        else:
            j = i
            while j < n and code[j] not in "'\"#":
                j += 1
            segments.append(code[i:j])
            i = j
    match = _FORBIDDEN_CALL.search("\x00".join(segments))
    return match.group(1) if match else None


def parse_decision(raw: str) -> Decision:
    """Parse the deciding-state reply into a Decision."""
    for obj in iter_json_objects(raw):
        flag = obj.get(USE_PYTHON_KEY)
        if not isinstance(flag, str) or flag.strip().lower() not in ("y", "n"):
            continue
        if flag.strip().lower() == "n":
            return Decision(use_python=False)
        description = obj.get(DESCRIPTION_KEY)
        if not isinstance(description, str) or not description.strip():
            raise MissingDescription()
        return Decision(use_python=True, description=description)
    raise MalformedOutput(
        f'no JSON object with a {USE_PYTHON_KEY!r} value of "y" or "n" found'
    )


def parse_codegen(raw: str) -> CodeArtifact:
    """Parse the code-generation reply into a CodeArtifact."""
    payload = None
    for obj in iter_json_objects(raw):
        candidate = obj.get(PYTHON_KEY) if isinstance(obj.get(PYTHON_KEY), dict) else obj
        if PYTHON_CODE_KEY in candidate and RESULT_VARIABLE_KEY in candidate:
            payload = candidate
            break
    if payload is None:
        raise MalformedOutput(
            f"no JSON object with {PYTHON_CODE_KEY!r} and {RESULT_VARIABLE_KEY!r} found"
        )
    code_field = payload[PYTHON_CODE_KEY]
    if not isinstance(code_field, str) or not code_field.strip():
        raise MalformedOutput(f"{PYTHON_CODE_KEY!r} must be a non-empty string")
    names_field = payload[RESULT_VARIABLE_KEY]
    if isinstance(names_field, str):
        names = [part.strip() for part in names_field.split(",")]
    elif isinstance(names_field, list) and all(isinstance(p, str) for p in names_field):
        names = [part.strip() for part in names_field]
    else:
        raise MalformedOutput(f"{RESULT_VARIABLE_KEY!r} must be a string or list of strings")
    names = [name for name in names if name]
    if not names:
        raise EmptyResultVariables()
    return CodeArtifact(code=strip_code_fence(code_field), result_variables=tuple(names))


_TURN_KEYS = (
    THOUGHTS_KEY,
    EVALUATION_KEY,
    ACTION_KEY,
    STEP_NUMBER_KEY,
    STEP_STATE_KEY,
    RESPONSE_KEY,
)


def parse_tutor_turn(raw: str) -> TutorTurn:
    """Parse a received-python or no-python state reply into a TutorTurn."""
    payload = None
    for obj in iter_json_objects(raw):
        if all(key in obj for key in _TURN_KEYS):
            payload = obj
            break
    if payload is None:
        raise MalformedOutput("no JSON object with all six tutor-turn fields found")

    evaluation_field = payload[EVALUATION_KEY]
    if not isinstance(evaluation_field, str):
        raise MalformedOutput(f"{EVALUATION_KEY!r} must be a string")
    try:
        evaluation = EvaluationCode(evaluation_field.strip().lower())
    except ValueError:
        raise MalformedOutput(
            f"{EVALUATION_KEY!r} must be one of a..g, got {evaluation_field!r}"
        ) from None

    action_field = payload[ACTION_KEY]
    try:
        action = int(str(action_field).strip())
    except ValueError:
        raise MalformedOutput(f"{ACTION_KEY!r} must be an integer, got {action_field!r}") from None
    if action not in ACTION_RANGE:
        raise MalformedOutput(f"{ACTION_KEY!r} must lie in 1..12, got {action}")

    state_field = payload[STEP_STATE_KEY]
    if not isinstance(state_field, str):
        raise MalformedOutput(f"{STEP_STATE_KEY!r} must be a string")
    try:
        step_state = StepState(state_field.strip().lower())
    except ValueError:
        raise MalformedOutput(
            f"{STEP_STATE_KEY!r} must be one of p/q/r/t, got {state_field!r}"
        ) from None

    response = payload[RESPONSE_KEY]
    if not isinstance(response, str) or not response:
        raise MalformedOutput(f"{RESPONSE_KEY!r} must be a non-empty string")

    if not validate_action(evaluation, action):
        raise InconsistentAction(evaluation, action)

    return TutorTurn(
        thoughts=str(payload[THOUGHTS_KEY]),
        evaluation=evaluation,
        action=action,
        step_number=str(payload[STEP_NUMBER_KEY]),
        step_state=step_state,
        response=response,
    )


def parse_enriched_solution(raw: str) -> EnrichedSolution:
    """Parse the solution-enrichment reply into an EnrichedSolution."""
    payload = None
    for obj in iter_json_objects(raw):
        if DETAILED_SOLUTION_KEY in obj and SOLUTION_OUTLINE_KEY in obj:
            payload = obj
            break
    if payload is None:
        raise MalformedOutput(
            f"no JSON object with {DETAILED_SOLUTION_KEY!r} and {SOLUTION_OUTLINE_KEY!r} found"
        )
    detailed = payload[DETAILED_SOLUTION_KEY]
    outline = payload[SOLUTION_OUTLINE_KEY]
    if not isinstance(detailed, str) or not detailed.strip():
        raise MalformedOutput(f"{DETAILED_SOLUTION_KEY!r} must be a non-empty string")
    if not isinstance(outline, str) or not outline.strip():
        raise MalformedOutput(f"{SOLUTION_OUTLINE_KEY!r} must be a non-empty string")
    if STEP_ONE_MARKER not in detailed:
        raise MissingStepNumbering(DETAILED_SOLUTION_KEY)
    if STEP_ONE_MARKER not in outline:
        raise MissingStepNumbering(SOLUTION_OUTLINE_KEY)
    return EnrichedSolution(detailed=detailed, outline=outline)


# Serializers, the inverses of the parsers above. Round-tripping any valid
# record through serialize -> parse is the identity.

def decision_to_wire(decision: Decision) -> str:
    if decision.use_python:
        return json.dumps(
            {USE_PYTHON_KEY: "y", DESCRIPTION_KEY: decision.description}, ensure_ascii=False
        )
    return json.dumps({USE_PYTHON_KEY: "n"})


def code_artifact_to_wire(artifact: CodeArtifact) -> str:
    fenced = f"``` python\n{artifact.code}\n```"
    return json.dumps(
        {
            PYTHON_KEY: {
                PYTHON_CODE_KEY: fenced,
                RESULT_VARIABLE_KEY: ", ".join(artifact.result_variables),
            }
        },
        ensure_ascii=False,
    )


def tutor_turn_to_wire(turn: TutorTurn) -> str:
    return json.dumps(
        {
            THOUGHTS_KEY: turn.thoughts,
            EVALUATION_KEY: turn.evaluation.value,
            ACTION_KEY: str(turn.action),
            STEP_NUMBER_KEY: turn.step_number,
            STEP_STATE_KEY: turn.step_state.value,
            RESPONSE_KEY: turn.response,
        },
        ensure_ascii=False,
    )


def enriched_solution_to_wire(solution: EnrichedSolution) -> str:
    return json.dumps(
        {
            DETAILED_SOLUTION_KEY: solution.detailed,
            SOLUTION_OUTLINE_KEY: solution.outline,
        },
        ensure_ascii=False,
    )
