"""Question corpus handling, batch generation, and training-data export.

The pipeline is: load question/solution pairs from JSON Lines, enrich each
terse solution into a numbered step-by-step narrative, generate a scheduled
batch of simulated dialogues with derived per-conversation seeds, then
export full transcripts (lossless, re-importable) and a fine-tuning
serialization whose loss-bearing turns are exactly the tutor's outputs.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .backends import CompletionParams, TransportError
from .conversation import (
    STATE_DECIDING,
    STATE_NO_PYTHON,
    STATE_RECEIVED_PYTHON,
    STATE_USE_PYTHON,
    STATUS_COMPLETE,
    STATUS_FAILED,
    Conversation,
    Provenance,
    conversation_from_dict,
    conversation_to_dict,
)
from .orchestrator import (
    EngineConfig,
    EngineError,
    StudentPolicy,
    complete_with_repairs,
    run_mock_conversation,
)
from .prompts import (
    STUDENT_SPEAKER_LABEL,
    PromptLibrary,
    TemplateId,
    default_library,
    serialize_history,
)
from .protocol import EnrichedSolution, parse_enriched_solution
from .sandbox import Sandbox, format_python_output


class ParseError(Exception):
    def __init__(self, line: int, reason: str = "invalid record"):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class DuplicateId(Exception):
    def __init__(self, line: int, record_id: str):
        super().__init__(f"line {line}: duplicate id {record_id!r}")
        self.line = line
        self.record_id = record_id


@dataclass
class QuestionRecord:
    """One question/solution pair, optionally carrying its enrichment."""

    id: str
    question: str
    sme_solution: str
    topic: str = ""
    enriched: EnrichedSolution | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("id must be non-empty")
        if not self.question or not self.sme_solution:
            raise ValueError("question and sme_solution must be non-empty")


def _record_from_dict(raw: dict) -> QuestionRecord:
    enriched = None
    if raw.get("enriched") is not None:
        enriched = EnrichedSolution(
            detailed=raw["enriched"]["detailed_solution"],
            outline=raw["enriched"]["solution_outline"],
        )
    return QuestionRecord(
        id=raw["id"],
        question=raw["question"],
        sme_solution=raw["sme_solution"],
        topic=raw.get("topic", ""),
        enriched=enriched,
    )


def _record_to_dict(record: QuestionRecord) -> dict:
    raw: dict = {
        "id": record.id,
        "question": record.question,
        "sme_solution": record.sme_solution,
        "topic": record.topic,
    }
    if record.enriched is not None:
        raw["enriched"] = {
            "detailed_solution": record.enriched.detailed,
            "solution_outline": record.enriched.outline,
        }
    return raw


def load_questions(path: Path | str) -> list[QuestionRecord]:
    """Read a JSON Lines corpus; blank lines are ignored."""
    records: list[QuestionRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except ValueError:
                raise ParseError(lineno, "not valid JSON") from None
            try:
                record = _record_from_dict(raw)
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(lineno, str(exc)) from None
            if record.id in seen:
                raise DuplicateId(lineno, record.id)
            seen.add(record.id)
            records.append(record)
    return records


def save_questions(records: list[QuestionRecord], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(_dump_line(_record_to_dict(record)))


def enrich_solution(
    record: QuestionRecord,
    backend,
    *,
    prompts: PromptLibrary | None = None,
    params: CompletionParams | None = None,
    max_repairs: int = 3,
    force: bool = False,
) -> EnrichedSolution:
    """Turn the terse SME solution into a numbered narrative plus outline.

    Idempotent: an already-enriched record is returned untouched without a
    backend call unless ``force`` is set. On repair exhaustion the record is
    left unchanged.
    """
    if record.enriched is not None and not force:
        return record.enriched
    prompts = prompts or default_library()
    params = params or CompletionParams(temperature=0.2)
    prompt = prompts.render(
        TemplateId.ENRICH_SOLUTION,
        {"question": record.question, "solution": record.sme_solution},
    )
    _, enriched, _ = complete_with_repairs(
        backend, prompt, params, parse_enriched_solution, "enrich_solution", max_repairs
    )
    record.enriched = enriched
    return enriched


def enrich_corpus(records: list[QuestionRecord], backend, **kwargs) -> int:
    """Enrich every record lacking an enrichment; returns how many ran."""
    before = sum(1 for record in records if record.enriched is not None)
    for record in records:
        enrich_solution(record, backend, **kwargs)
    return len(records) - before


def schedule(question_ids: list[str], total: int) -> list[tuple[str, int]]:
    """Apportion ``total`` conversations round-robin over the questions.

    Pass one covers every question once in id order; further passes restart
    from the first id with the replicate index incremented, so a surplus of
    N lands on the first N ids. Returns (question id, replicate) pairs in
    generation order.
    """
    if total < 0:
        raise ValueError("total must be non-negative")
    if total and not question_ids:
        raise ValueError("cannot schedule conversations without questions")
    ordered = sorted(question_ids)
    plan: list[tuple[str, int]] = []
    replicate = 1
    while len(plan) < total:
        for question_id in ordered:
            if len(plan) == total:
                break
            plan.append((question_id, replicate))
        replicate += 1
    return plan


def derive_seed(corpus_seed: int, question_id: str, replicate: int) -> int:
    """Stable per-conversation seed; independent of schedule position."""
    key = f"{corpus_seed}|{question_id}|{replicate}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def conversation_id(question_id: str, replicate: int) -> str:
    return f"{question_id}-{replicate}"


def _dump_line(raw: dict) -> str:
    return json.dumps(raw, ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n"


def _existing_ids(path: Path) -> set[str]:
    ids: set[str] = set()
    if not path.exists():
        return ids
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                ids.add(json.loads(line)["conversation_id"])
    return ids


def _failed_conversation(
    record: QuestionRecord,
    cid: str,
    seed: int,
    reason: str,
    config: EngineConfig,
    prompts: PromptLibrary,
    backend_kind: str,
    created_at: float,
) -> Conversation:
    assert record.enriched is not None
    return Conversation(
        conversation_id=cid,
        question_id=record.id,
        question=record.question,
        detailed_solution=record.enriched.detailed,
        solution_outline=record.enriched.outline,
        status=STATUS_FAILED,
        failure=reason,
        visible_turns=[],
        traces={},
        provenance=Provenance(
            model_id=config.model_id,
            backend_kind=backend_kind,
            seed=seed,
            student_temperature=config.student_temperature,
            tutor_temperature=config.tutor_temperature,
            template_checksums=prompts.checksums(),
            created_at=created_at,
        ),
    )


def generate_corpus(
    records: list[QuestionRecord],
    total: int,
    *,
    backend=None,
    backend_factory=None,
    policy: StudentPolicy | None = None,
    sandbox: Sandbox | None = None,
    config: EngineConfig | None = None,
    prompts: PromptLibrary | None = None,
    corpus_seed: int = 0,
    out_path: Path | str | None = None,
    workers: int = 1,
    clock=time.time,
) -> list[Conversation]:
    """Generate the scheduled batch; returns the newly produced records.

    Each conversation gets its own derived seed for the student policy and,
    when ``backend_factory`` is given, its own backend instance, keeping
    results independent of worker interleaving. Conversations are written to
    ``out_path`` in schedule order as they finish; ids already present there
    are skipped, which makes interrupted batches resumable. Per-conversation
    failures become failed records; the batch always continues.
    """
    if (backend is None) == (backend_factory is None):
        raise ValueError("provide exactly one of backend or backend_factory")
    if workers < 1:
        raise ValueError("workers must be positive")
    not_enriched = [record.id for record in records if record.enriched is None]
    if not_enriched:
        raise ValueError(f"records not enriched: {', '.join(sorted(not_enriched))}")
    config = config or EngineConfig()
    prompts = prompts or default_library()
    sandbox = sandbox or Sandbox()
    policy = policy or StudentPolicy()
    by_id = {record.id: record for record in records}

    plan = schedule(sorted(by_id), total)
    done = _existing_ids(Path(out_path)) if out_path is not None else set()
    pending = [
        (question_id, replicate)
        for question_id, replicate in plan
        if conversation_id(question_id, replicate) not in done
    ]

    def run_one(item: tuple[str, int]) -> Conversation:
        question_id, replicate = item
        record = by_id[question_id]
        assert record.enriched is not None
        seed = derive_seed(corpus_seed, question_id, replicate)
        cid = conversation_id(question_id, replicate)
        chosen = backend_factory(seed) if backend_factory is not None else backend
        try:
            return run_mock_conversation(
                chosen,
                question=record.question,
                detailed_solution=record.enriched.detailed,
                solution_outline=record.enriched.outline,
                conversation_id=cid,
                question_id=question_id,
                config=config,
                prompts=prompts,
                sandbox=sandbox,
                student_policy=StudentPolicy(
                    error_rate=policy.error_rate,
                    error_modes=policy.error_modes,
                    seed=seed,
                ),
                clock=clock,
            )
        except (TransportError, EngineError) as exc:
            return _failed_conversation(
                record, cid, seed, str(exc), config, prompts, chosen.kind, float(clock())
            )

    produced: list[Conversation] = []
    writer = open(out_path, "a", encoding="utf-8") if out_path is not None else None
    try:
        # Executor.map yields in submission order, so the output file is
        # byte-stable regardless of worker interleaving.
        if workers == 1:
            results = map(run_one, pending)
            for conversation in results:
                produced.append(conversation)
                if writer is not None:
                    writer.write(_dump_line(conversation_to_dict(conversation)))
                    writer.flush()
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for conversation in pool.map(run_one, pending):
                    produced.append(conversation)
                    if writer is not None:
                        writer.write(_dump_line(conversation_to_dict(conversation)))
                        writer.flush()
    finally:
        if writer is not None:
            writer.close()
    return produced


def export_transcripts(conversations: list[Conversation], path: Path | str) -> int:
    """Write full conversation records as JSON Lines; returns the count."""
    with open(path, "w", encoding="utf-8") as handle:
        for conversation in conversations:
            handle.write(_dump_line(conversation_to_dict(conversation)))
    return len(conversations)


def import_transcripts(path: Path | str) -> list[Conversation]:
    conversations: list[Conversation] = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                conversations.append(conversation_from_dict(json.loads(line)))
    return conversations


def _state_prompt(
    conversation: Conversation, trace, state: str, history: str, prompts: PromptLibrary
) -> str:
    shared = {
        "question": conversation.question,
        "solution": conversation.detailed_solution,
        "history": history,
    }
    if state == STATE_DECIDING:
        return prompts.render(TemplateId.DECIDING, shared)
    if state == STATE_USE_PYTHON:
        return prompts.render(
            TemplateId.USE_PYTHON, {"description": trace.decision.description}
        )
    if state == STATE_RECEIVED_PYTHON:
        return prompts.render(
            TemplateId.RECEIVED_PYTHON,
            {
                **shared,
                "description": trace.decision.description,
                "python_output": format_python_output(trace.execution),
            },
        )
    assert state == STATE_NO_PYTHON
    return prompts.render(TemplateId.NO_PYTHON, shared)


def finetune_example(
    conversation: Conversation,
    include_traces: bool = True,
    prompts: PromptLibrary | None = None,
) -> dict:
    """Serialize one conversation for fine-tuning.

    With traces included, each tutor turn becomes its state prompts (system,
    no loss) paired with the model's raw state outputs (assistant, loss);
    the visible response already lives inside the final state output.
    Without traces, only the visible dialogue remains. In both shapes the
    loss-bearing messages are exactly the tutor's outputs.
    """
    prompts = prompts or default_library()
    messages: list[dict] = []
    history: list = []
    ordinal = 0
    for turn in conversation.visible_turns:
        if turn.speaker == STUDENT_SPEAKER_LABEL:
            messages.append({"role": "user", "content": turn.text, "loss_flag": False})
        else:
            ordinal += 1
            trace = conversation.traces[ordinal]
            if include_traces:
                serialized = serialize_history(history, audience="tutorbot")
                for state in trace.states:
                    messages.append(
                        {
                            "role": "system",
                            "content": _state_prompt(
                                conversation, trace, state, serialized, prompts
                            ),
                            "loss_flag": False,
                        }
                    )
                    messages.append(
                        {
                            "role": "assistant",
                            "content": trace.raw_texts[state],
                            "loss_flag": True,
                        }
                    )
            else:
                messages.append(
                    {"role": "assistant", "content": turn.text, "loss_flag": True}
                )
        history.append(turn)
    return {"messages": messages}


def export_finetune(
    conversations: list[Conversation],
    path: Path | str,
    include_traces: bool = True,
    include_incomplete: bool = False,
    prompts: PromptLibrary | None = None,
) -> int:
    """Write fine-tuning examples; returns how many conversations exported.

    Failed and truncated conversations are excluded unless
    ``include_incomplete`` is set (failed ones are never exportable anyway,
    as they have no turns to learn from).
    """
    prompts = prompts or default_library()
    written = 0
    with open(path, "w", encoding="utf-8") as handle:
        for conversation in conversations:
            if conversation.status != STATUS_COMPLETE and not include_incomplete:
                continue
            if not conversation.traces:
                continue
            handle.write(
                _dump_line(finetune_example(conversation, include_traces, prompts))
            )
            written += 1
    return written
