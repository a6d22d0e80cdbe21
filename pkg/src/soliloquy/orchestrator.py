"""The four-state hidden dialogue engine behind every tutor turn.

For each student message the tutor runs a private sub-dialogue: decide
whether the reply needs a calculation; if so, write code, run it in the
sandbox, and answer with the verified numbers in hand; if not, answer
directly. Only the final response field ever reaches the student. Malformed
model output is repaired in place by appending the bad reply and a
correction request, up to a configured budget.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from random import Random

from .backends import (
    ROLE_ASSISTANT,
    ROLE_USER,
    ChatBackend,
    ChatMessage,
    CompletionParams,
)
from .conversation import (
    STATE_DECIDING,
    STATE_NO_PYTHON,
    STATE_RECEIVED_PYTHON,
    STATE_USE_PYTHON,
    STATUS_COMPLETE,
    STATUS_FAILED,
    STATUS_TRUNCATED,
    Conversation,
    Provenance,
    SoliloquyTrace,
    VisibleTurn,
)
from .prompts import (
    STUDENT_SPEAKER_LABEL,
    TUTOR_SPEAKER_LABEL,
    PromptLibrary,
    TemplateId,
    default_library,
    serialize_history,
)
from .protocol import (
    CodeArtifact,
    MalformedOutput,
    OutputParseError,
    StepState,
    parse_codegen,
    parse_decision,
    parse_tutor_turn,
)
from .sandbox import ExecutionResult, Sandbox, format_python_output


class SoliloquyState(Enum):
    """Where the tutor currently stands in its hidden sub-dialogue."""

    DECIDING = STATE_DECIDING
    USE_PYTHON = STATE_USE_PYTHON
    RECEIVED_PYTHON = STATE_RECEIVED_PYTHON
    NO_PYTHON = STATE_NO_PYTHON


LEGAL_TRANSITIONS: dict[SoliloquyState, frozenset[SoliloquyState]] = {
    SoliloquyState.DECIDING: frozenset(
        {SoliloquyState.USE_PYTHON, SoliloquyState.NO_PYTHON}
    ),
    SoliloquyState.USE_PYTHON: frozenset({SoliloquyState.RECEIVED_PYTHON}),
    SoliloquyState.RECEIVED_PYTHON: frozenset({SoliloquyState.DECIDING}),
    SoliloquyState.NO_PYTHON: frozenset({SoliloquyState.DECIDING}),
}


class EngineError(Exception):
    pass


class IllegalTransition(EngineError):
    def __init__(self, current: SoliloquyState, target: SoliloquyState):
        super().__init__(f"illegal transition {current.value} -> {target.value}")
        self.current = current
        self.target = target


class SessionFinished(EngineError):
    def __init__(self):
        super().__init__("session already finished")


class ProtocolFailure(EngineError):
    """The model never produced a usable reply within the repair budget."""

    def __init__(self, stage: str, attempts: int, last_error: str, raw_texts: tuple[str, ...]):
        super().__init__(
            f"no usable reply in stage {stage!r} after {attempts} attempts: {last_error}"
        )
        self.stage = stage
        self.attempts = attempts
        self.last_error = last_error
        self.raw_texts = raw_texts


# The student template's self-randomizing tail starts at this line; the
# engine replaces it so that error injection is a seeded engine-side draw.
STUDENT_ERROR_MARKER = "Generate an incorrect response 10"

ERROR_MODES = (
    "apply the wrong formulae",
    "incorrectly rearrange the formulae to isolate the unknown variable on one side",
    "perform unit conversion incorrectly",
    "error in calculations",
)


@dataclass(frozen=True)
class EngineConfig:
    """Generation knobs; the student runs warmer than the tutor states."""

    model_id: str = "gpt-4"
    student_temperature: float = 0.7
    tutor_temperature: float = 0.2
    max_tokens: int = 1024
    max_repairs: int = 3
    max_visible_turns: int = 40

    def __post_init__(self):
        if self.max_repairs < 0:
            raise ValueError("max_repairs must be non-negative")
        if self.max_visible_turns < 1:
            raise ValueError("max_visible_turns must be positive")


class StudentPolicy:
    """Seeded draw deciding when and how the student errs on purpose."""

    def __init__(
        self,
        error_rate: float = 0.10,
        error_modes: tuple[str, ...] = ERROR_MODES,
        seed: int | None = None,
    ):
        if not 0.0 <= error_rate <= 1.0:
            raise ValueError(f"error_rate must lie in [0, 1], got {error_rate}")
        if error_rate > 0 and not error_modes:
            raise ValueError("error_modes must be non-empty when error_rate > 0")
        self.error_rate = error_rate
        self.error_modes = tuple(error_modes)
        self.seed = seed
        self._rng = Random(seed)

    def draw(self) -> str | None:
        """The error mode for the next student turn, or None for a genuine try."""
        if self._rng.random() < self.error_rate:
            return self._rng.choice(self.error_modes)
        return None


def complete_with_repairs(backend, prompt, params, parser, stage, max_repairs):
    """One model exchange with in-place repair; returns (raw, parsed, repairs).

    Each failed parse appends the offending reply and a correction request to
    the message list, so the model sees its own mistake. After
    ``max_repairs`` retries a ProtocolFailure carries every raw attempt.
    """
    messages = [ChatMessage(role=ROLE_USER, content=prompt)]
    raws: list[str] = []
    last_error = "no reply"
    for attempt in range(max_repairs + 1):
        reply = backend.complete(messages, params)
        raws.append(reply)
        try:
            return reply, parser(reply), attempt
        except OutputParseError as exc:
            last_error = str(exc)
            messages = messages + [
                ChatMessage(role=ROLE_ASSISTANT, content=reply or "(empty reply)"),
                ChatMessage(
                    role=ROLE_USER,
                    content=(
                        f"Your previous reply could not be processed: {exc}. "
                        "Reply again following the instructions above exactly, "
                        "with nothing outside the required format."
                    ),
                ),
            ]
    raise ProtocolFailure(
        stage=stage,
        attempts=max_repairs + 1,
        last_error=last_error,
        raw_texts=tuple(raws),
    )


def apply_error_mode(prompt: str, mode: str | None) -> str:
    """Replace the template's own 10-percent instruction with the drawn mode."""
    cut = prompt.find(STUDENT_ERROR_MARKER)
    if cut != -1:
        prompt = prompt[:cut].rstrip()
    if mode is None:
        return prompt + "\n\nRespond correctly to the best of your ability."
    return prompt + f"\n\nGenerate an incorrect response in this way: {mode}."


def _strip_speaker_label(text: str) -> str:
    for label in (STUDENT_SPEAKER_LABEL, TUTOR_SPEAKER_LABEL):
        prefix = f"{label}:"
        if text.startswith(prefix):
            return text[len(prefix):].strip()
    return text


class Session:
    """One tutoring dialogue in progress, hidden state machine included.

    The session enforces strict alternation: a student turn, then exactly
    one tutor turn, and so on. A ProtocolFailure rolls the pending student
    turn back so the visible record never holds an unanswered message.
    """

    def __init__(
        self,
        backend: ChatBackend,
        *,
        question: str,
        detailed_solution: str,
        solution_outline: str,
        conversation_id: str = "session",
        question_id: str = "question",
        config: EngineConfig | None = None,
        prompts: PromptLibrary | None = None,
        sandbox: Sandbox | None = None,
        student_policy: StudentPolicy | None = None,
        clock=time.time,
    ):
        self.backend = backend
        self.question = question
        self.detailed_solution = detailed_solution
        self.solution_outline = solution_outline
        self.conversation_id = conversation_id
        self.question_id = question_id
        self.config = config or EngineConfig()
        self.prompts = prompts or default_library()
        self.sandbox = sandbox or Sandbox()
        self.student_policy = student_policy or StudentPolicy()
        self.state = SoliloquyState.DECIDING
        self.visible_turns: list[VisibleTurn] = []
        self.traces: dict[int, SoliloquyTrace] = {}
        self.finished = False
        self.last_failure: ProtocolFailure | None = None
        self._created_at = float(clock())

    @property
    def awaiting(self) -> str:
        """Which speaker owes the next visible turn."""
        if self.visible_turns and self.visible_turns[-1].speaker == STUDENT_SPEAKER_LABEL:
            return "tutorbot"
        return "student"

    def student_says(self, text: str) -> None:
        """Record an externally supplied student message."""
        if self.finished:
            raise SessionFinished()
        if self.awaiting != "student":
            raise ValueError("not the student's turn")
        text = _strip_speaker_label(text.strip())
        self.visible_turns.append(VisibleTurn(speaker=STUDENT_SPEAKER_LABEL, text=text))

    def student_respond(self) -> str:
        """Generate the simulated student's next message."""
        if self.finished:
            raise SessionFinished()
        if self.awaiting != "student":
            raise ValueError("not the student's turn")
        prompt = self.prompts.render(
            TemplateId.STUDENT,
            {
                "question": self.question,
                "history": serialize_history(self.visible_turns, audience="student"),
            },
        )
        prompt = apply_error_mode(prompt, self.student_policy.draw())
        params = CompletionParams(
            model=self.config.model_id,
            temperature=self.config.student_temperature,
            max_tokens=self.config.max_tokens,
        )
        _, text, _ = self._call("student", prompt, params, _parse_student_reply)
        self.visible_turns.append(VisibleTurn(speaker=STUDENT_SPEAKER_LABEL, text=text))
        return text

    def tutor_respond(self) -> SoliloquyTrace:
        """Run the hidden sub-dialogue and append the tutor's visible turn."""
        if self.finished:
            raise SessionFinished()
        if self.awaiting != "tutorbot":
            raise ValueError("awaiting a student turn")
        try:
            trace = self._run_soliloquy()
        except ProtocolFailure as exc:
            # Roll back so the visible record never ends on an unanswered
            # student message; the caller may retry with a fresh turn.
            self.visible_turns.pop()
            self.state = SoliloquyState.DECIDING
            self.last_failure = exc
            raise
        ordinal = len(self.traces) + 1
        self.traces[ordinal] = trace
        self.visible_turns.append(
            VisibleTurn(speaker=TUTOR_SPEAKER_LABEL, text=trace.turn.response)
        )
        if trace.turn.step_state is StepState.PROBLEM_FINISHED:
            self.finished = True
        return trace

    def _run_soliloquy(self) -> SoliloquyTrace:
        assert self.state is SoliloquyState.DECIDING
        params = CompletionParams(
            model=self.config.model_id,
            temperature=self.config.tutor_temperature,
            max_tokens=self.config.max_tokens,
        )
        history = serialize_history(self.visible_turns, audience="tutorbot")
        shared = {
            "question": self.question,
            "solution": self.detailed_solution,
            "history": history,
        }
        raw_texts: dict[str, str] = {}
        repairs = 0

        prompt = self.prompts.render(TemplateId.DECIDING, shared)
        raw, decision, used = self._call(STATE_DECIDING, prompt, params, parse_decision)
        raw_texts[STATE_DECIDING] = raw
        repairs += used

        artifact: CodeArtifact | None = None
        execution: ExecutionResult | None = None
        if decision.use_python:
            self._transition(SoliloquyState.USE_PYTHON)
            prompt = self.prompts.render(
                TemplateId.USE_PYTHON, {"description": decision.description}
            )
            raw, artifact, used = self._call(
                STATE_USE_PYTHON, prompt, params, parse_codegen
            )
            raw_texts[STATE_USE_PYTHON] = raw
            repairs += used

            execution = self.sandbox.execute(artifact)

            self._transition(SoliloquyState.RECEIVED_PYTHON)
            prompt = self.prompts.render(
                TemplateId.RECEIVED_PYTHON,
                {
                    **shared,
                    "description": decision.description,
                    "python_output": format_python_output(execution),
                },
            )
            raw, turn, used = self._call(
                STATE_RECEIVED_PYTHON, prompt, params, parse_tutor_turn
            )
            raw_texts[STATE_RECEIVED_PYTHON] = raw
            repairs += used
        else:
            self._transition(SoliloquyState.NO_PYTHON)
            prompt = self.prompts.render(TemplateId.NO_PYTHON, shared)
            raw, turn, used = self._call(
                STATE_NO_PYTHON, prompt, params, parse_tutor_turn
            )
            raw_texts[STATE_NO_PYTHON] = raw
            repairs += used

        self._transition(SoliloquyState.DECIDING)
        return SoliloquyTrace(
            states=tuple(raw_texts),
            decision=decision,
            artifact=artifact,
            execution=execution,
            turn=turn,
            raw_texts=raw_texts,
            repair_attempts=repairs,
        )

    def _transition(self, target: SoliloquyState) -> None:
        if target not in LEGAL_TRANSITIONS[self.state]:
            raise IllegalTransition(self.state, target)
        self.state = target

    def _call(self, stage, prompt, params, parser):
        return complete_with_repairs(
            self.backend, prompt, params, parser, stage, self.config.max_repairs
        )

    def snapshot(self, status: str | None = None, failure: str | None = None) -> Conversation:
        """Freeze the session into an immutable conversation record."""
        if status is None:
            status = STATUS_COMPLETE if self.finished else STATUS_TRUNCATED
        return Conversation(
            conversation_id=self.conversation_id,
            question_id=self.question_id,
            question=self.question,
            detailed_solution=self.detailed_solution,
            solution_outline=self.solution_outline,
            status=status,
            failure=failure,
            visible_turns=list(self.visible_turns),
            traces=dict(self.traces),
            provenance=Provenance(
                model_id=self.config.model_id,
                backend_kind=self.backend.kind,
                seed=self.student_policy.seed,
                student_temperature=self.config.student_temperature,
                tutor_temperature=self.config.tutor_temperature,
                template_checksums=self.prompts.checksums(),
                created_at=self._created_at,
            ),
        )


def _parse_student_reply(raw: str) -> str:
    text = _strip_speaker_label(raw.strip())
    if not text:
        raise MalformedOutput("empty student reply")
    return text


def step_soliloquy(session: Session, student_message: str):
    """Feed one student message through the hidden loop.

    Returns (TutorTurn, SoliloquyTrace) for the resulting tutor turn. On
    ProtocolFailure the student message is rolled back and the session stays
    open for inspection or retry.
    """
    session.student_says(student_message)
    trace = session.tutor_respond()
    return trace.turn, trace


def run_mock_conversation(
    backend: ChatBackend,
    *,
    question: str,
    detailed_solution: str,
    solution_outline: str,
    conversation_id: str = "session",
    question_id: str = "question",
    config: EngineConfig | None = None,
    prompts: PromptLibrary | None = None,
    sandbox: Sandbox | None = None,
    student_policy: StudentPolicy | None = None,
    clock=time.time,
) -> Conversation:
    """Drive a full simulated dialogue, both roles played by the backend.

    Never raises for model misbehavior: repair exhaustion yields a failed
    conversation carrying the stage and final parse error.
    """
    session = Session(
        backend,
        question=question,
        detailed_solution=detailed_solution,
        solution_outline=solution_outline,
        conversation_id=conversation_id,
        question_id=question_id,
        config=config,
        prompts=prompts,
        sandbox=sandbox,
        student_policy=student_policy,
        clock=clock,
    )
    # The cap is checked before each exchange, so a pending student message
    # is always answered: a cap of 1 still yields one full exchange.
    try:
        while not session.finished and len(session.visible_turns) < session.config.max_visible_turns:
            session.student_respond()
            session.tutor_respond()
    except ProtocolFailure as exc:
        return session.snapshot(
            status=STATUS_FAILED, failure=f"{exc.stage}: {exc.last_error}"
        )
    return session.snapshot()
