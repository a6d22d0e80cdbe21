"""Calculation-accurate tutoring dialogues driven by a hidden code loop.

Before every reply the tutor runs a private four-state sub-dialogue:
decide whether the response needs a calculation; if so, write Python, run
it in an isolated sandbox, and answer with the verified numbers; if not,
answer directly. The package provides that engine, a batch pipeline that
turns question/solution corpora into transcript and fine-tuning datasets,
a paired-case evaluation harness with four binary metrics, and an HTTP
service plus CLI for live sessions and SME judging.
"""

from .backends import (
    ChatMessage,
    CompletionParams,
    HttpChatBackend,
    RecordingBackend,
    ScriptedBackend,
    dump_fixture,
    load_fixture,
)
from .conversation import (
    Conversation,
    Provenance,
    SoliloquyTrace,
    VisibleTurn,
    conversation_from_dict,
    conversation_to_dict,
    hidden_strings,
)
from .orchestrator import (
    EngineConfig,
    ProtocolFailure,
    Session,
    SessionFinished,
    SoliloquyState,
    StudentPolicy,
    run_mock_conversation,
    step_soliloquy,
)
from .protocol import (
    CodeArtifact,
    Decision,
    EnrichedSolution,
    EvaluationCode,
    StepState,
    TutorTurn,
    validate_action,
)
from .sandbox import ExecutionLimits, ExecutionResult, Sandbox, format_python_output
from .testing import SimulatedModel

__all__ = [
    "ChatMessage",
    "CodeArtifact",
    "CompletionParams",
    "Conversation",
    "Decision",
    "EngineConfig",
    "EnrichedSolution",
    "EvaluationCode",
    "ExecutionLimits",
    "ExecutionResult",
    "HttpChatBackend",
    "ProtocolFailure",
    "Provenance",
    "RecordingBackend",
    "Sandbox",
    "ScriptedBackend",
    "Session",
    "SessionFinished",
    "SimulatedModel",
    "SoliloquyState",
    "SoliloquyTrace",
    "StepState",
    "StudentPolicy",
    "TutorTurn",
    "VisibleTurn",
    "conversation_from_dict",
    "conversation_to_dict",
    "dump_fixture",
    "format_python_output",
    "hidden_strings",
    "load_fixture",
    "run_mock_conversation",
    "step_soliloquy",
    "validate_action",
]
