"""Conversation records: what the student saw, and what stayed hidden.

A conversation separates two channels. ``visible_turns`` is the dialogue as
the student experienced it. ``traces`` holds, per tutor turn, the hidden
deliberation: the use-Python decision, any generated code and its execution,
and the final structured turn the visible response was lifted from. The
codecs here give exact round-trips through plain JSON-ready dicts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .prompts import STUDENT_SPEAKER_LABEL, TUTOR_SPEAKER_LABEL
from .protocol import (
    CodeArtifact,
    Decision,
    EvaluationCode,
    StepState,
    TutorTurn,
)
from .sandbox import ExecutionResult

STATUS_COMPLETE = "complete"
STATUS_TRUNCATED = "truncated"
STATUS_FAILED = "failed"

_CONVERSATION_STATUSES = (STATUS_COMPLETE, STATUS_TRUNCATED, STATUS_FAILED)

STATE_DECIDING = "deciding"
STATE_USE_PYTHON = "use_python"
STATE_RECEIVED_PYTHON = "received_python"
STATE_NO_PYTHON = "no_python"

# The only two paths through the hidden dialogue for one tutor turn.
LEGAL_STATE_SEQUENCES = (
    (STATE_DECIDING, STATE_USE_PYTHON, STATE_RECEIVED_PYTHON),
    (STATE_DECIDING, STATE_NO_PYTHON),
)

MIN_HIDDEN_LENGTH = 8


@dataclass(frozen=True)
class VisibleTurn:
    """One utterance in the student-facing dialogue."""

    speaker: str
    text: str

    def __post_init__(self):
        if self.speaker not in (STUDENT_SPEAKER_LABEL, TUTOR_SPEAKER_LABEL):
            raise ValueError(f"unknown speaker {self.speaker!r}")
        if not self.text:
            raise ValueError("turn text must be non-empty")


@dataclass(frozen=True)
class SoliloquyTrace:
    """Hidden record of one tutor turn's internal dialogue."""

    states: tuple[str, ...]
    decision: Decision
    artifact: CodeArtifact | None
    execution: ExecutionResult | None
    turn: TutorTurn
    raw_texts: dict[str, str]
    repair_attempts: int = 0

    def __post_init__(self):
        if self.states not in LEGAL_STATE_SEQUENCES:
            raise ValueError(f"illegal state sequence {self.states!r}")
        if self.decision.use_python != (self.states[1] == STATE_USE_PYTHON):
            raise ValueError("decision disagrees with state sequence")
        if self.decision.use_python:
            if self.artifact is None or self.execution is None:
                raise ValueError("use-python turn must record artifact and execution")
        elif self.artifact is not None or self.execution is not None:
            raise ValueError("no-python turn must not record artifact or execution")
        if set(self.raw_texts) != set(self.states):
            raise ValueError("raw_texts keys must match visited states")
        if self.repair_attempts < 0:
            raise ValueError("repair_attempts must be non-negative")


def hidden_strings(trace: SoliloquyTrace) -> list[str]:
    """All hidden text of the trace that must never reach the student.

    The visible response and executed numeric values are excluded: the tutor
    legitimately quotes both. Everything else, from the decision rationale to
    raw model outputs, is private; strings shorter than ``MIN_HIDDEN_LENGTH``
    are dropped as too generic to witness a leak.
    """
    candidates: list[str] = [trace.turn.thoughts]
    if trace.decision.description is not None:
        candidates.append(trace.decision.description)
    if trace.artifact is not None:
        candidates.append(trace.artifact.code)
        candidates.extend(trace.artifact.result_variables)
    if trace.execution is not None:
        candidates.append(trace.execution.stderr)
    candidates.extend(trace.raw_texts.values())
    return [
        text.strip()
        for text in candidates
        if len(text.strip()) >= MIN_HIDDEN_LENGTH
    ]


@dataclass(frozen=True)
class Provenance:
    """How a conversation was produced, enough to audit or reproduce it."""

    model_id: str
    backend_kind: str
    seed: int | None
    student_temperature: float
    tutor_temperature: float
    template_checksums: dict[str, str]
    created_at: float


@dataclass
class Conversation:
    """A full tutoring dialogue with its hidden traces and provenance."""

    conversation_id: str
    question_id: str
    question: str
    detailed_solution: str
    solution_outline: str
    status: str
    visible_turns: list[VisibleTurn]
    traces: dict[int, SoliloquyTrace]
    provenance: Provenance
    failure: str | None = None

    def __post_init__(self):
        if self.status not in _CONVERSATION_STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if (self.failure is not None) != (self.status == STATUS_FAILED):
            raise ValueError("failure text is required exactly when status is failed")
        for index, turn in enumerate(self.visible_turns):
            expected = STUDENT_SPEAKER_LABEL if index % 2 == 0 else TUTOR_SPEAKER_LABEL
            if turn.speaker != expected:
                raise ValueError("speakers must alternate starting with the student")
        ordinals = [
            i
            for i, turn in enumerate(self.visible_turns, start=0)
            if turn.speaker == TUTOR_SPEAKER_LABEL
        ]
        expected = set(range(1, len(ordinals) + 1))
        if set(self.traces) != expected:
            raise ValueError("traces must cover tutor turns 1..n exactly")
        for ordinal, index in enumerate(ordinals, start=1):
            if self.traces[ordinal].turn.response != self.visible_turns[index].text:
                raise ValueError(f"trace {ordinal} disagrees with visible turn")

    def tutor_turn_count(self) -> int:
        return len(self.traces)

    def visible_text(self) -> str:
        """The entire student-facing channel as one string."""
        return "\n".join(turn.text for turn in self.visible_turns)


def _decision_to_dict(decision: Decision) -> dict:
    return {"use_python": decision.use_python, "description": decision.description}


def _decision_from_dict(raw: dict) -> Decision:
    return Decision(use_python=raw["use_python"], description=raw["description"])


def _artifact_to_dict(artifact: CodeArtifact | None) -> dict | None:
    if artifact is None:
        return None
    return {"code": artifact.code, "result_variables": list(artifact.result_variables)}


def _artifact_from_dict(raw: dict | None) -> CodeArtifact | None:
    if raw is None:
        return None
    return CodeArtifact(code=raw["code"], result_variables=tuple(raw["result_variables"]))


def _execution_to_dict(execution: ExecutionResult | None) -> dict | None:
    if execution is None:
        return None
    return {
        "status": execution.status,
        "values": dict(execution.values),
        "stderr": execution.stderr,
    }


def _execution_from_dict(raw: dict | None) -> ExecutionResult | None:
    if raw is None:
        return None
    return ExecutionResult(
        status=raw["status"], values=dict(raw["values"]), stderr=raw["stderr"]
    )


def _turn_to_dict(turn: TutorTurn) -> dict:
    return {
        "thoughts": turn.thoughts,
        "evaluation": turn.evaluation.value,
        "action": turn.action,
        "step_number": turn.step_number,
        "step_state": turn.step_state.value,
        "response": turn.response,
    }


def _turn_from_dict(raw: dict) -> TutorTurn:
    return TutorTurn(
        thoughts=raw["thoughts"],
        evaluation=EvaluationCode(raw["evaluation"]),
        action=raw["action"],
        step_number=raw["step_number"],
        step_state=StepState(raw["step_state"]),
        response=raw["response"],
    )


def trace_to_dict(trace: SoliloquyTrace) -> dict:
    return {
        "states": list(trace.states),
        "decision": _decision_to_dict(trace.decision),
        "artifact": _artifact_to_dict(trace.artifact),
        "execution": _execution_to_dict(trace.execution),
        "turn": _turn_to_dict(trace.turn),
        "raw_texts": dict(trace.raw_texts),
        "repair_attempts": trace.repair_attempts,
    }


def trace_from_dict(raw: dict) -> SoliloquyTrace:
    try:
        return SoliloquyTrace(
            states=tuple(raw["states"]),
            decision=_decision_from_dict(raw["decision"]),
            artifact=_artifact_from_dict(raw["artifact"]),
            execution=_execution_from_dict(raw["execution"]),
            turn=_turn_from_dict(raw["turn"]),
            raw_texts=dict(raw["raw_texts"]),
            repair_attempts=raw["repair_attempts"],
        )
    except (KeyError, TypeError) as exc:
        raise ValueError("malformed trace record") from exc


def conversation_to_dict(conversation: Conversation) -> dict:
    """JSON-ready encoding; ``conversation_from_dict`` inverts it exactly."""
    prov = conversation.provenance
    return {
        "conversation_id": conversation.conversation_id,
        "question_id": conversation.question_id,
        "question": conversation.question,
        "detailed_solution": conversation.detailed_solution,
        "solution_outline": conversation.solution_outline,
        "status": conversation.status,
        "failure": conversation.failure,
        "visible_turns": [
            {"speaker": turn.speaker, "text": turn.text}
            for turn in conversation.visible_turns
        ],
        "traces": {
            str(ordinal): trace_to_dict(trace)
            for ordinal, trace in sorted(conversation.traces.items())
        },
        "provenance": {
            "model_id": prov.model_id,
            "backend_kind": prov.backend_kind,
            "seed": prov.seed,
            "student_temperature": prov.student_temperature,
            "tutor_temperature": prov.tutor_temperature,
            "template_checksums": dict(prov.template_checksums),
            "created_at": prov.created_at,
        },
    }


def conversation_from_dict(raw: dict) -> Conversation:
    try:
        prov = raw["provenance"]
        return Conversation(
            conversation_id=raw["conversation_id"],
            question_id=raw["question_id"],
            question=raw["question"],
            detailed_solution=raw["detailed_solution"],
            solution_outline=raw["solution_outline"],
            status=raw["status"],
            failure=raw["failure"],
            visible_turns=[
                VisibleTurn(speaker=item["speaker"], text=item["text"])
                for item in raw["visible_turns"]
            ],
            traces={
                int(ordinal): trace_from_dict(item)
                for ordinal, item in raw["traces"].items()
            },
            provenance=Provenance(
                model_id=prov["model_id"],
                backend_kind=prov["backend_kind"],
                seed=prov["seed"],
                student_temperature=prov["student_temperature"],
                tutor_temperature=prov["tutor_temperature"],
                template_checksums=dict(prov["template_checksums"]),
                created_at=prov["created_at"],
            ),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError("malformed conversation record") from exc
