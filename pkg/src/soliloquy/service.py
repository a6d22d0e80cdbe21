"""HTTP surface for live tutoring sessions and SME judgment capture.

Sessions live in memory behind per-session locks; one hidden-loop step runs
per message request, synchronously. Two bearer-token tiers exist: the
student tier can chat and judge, the inspector tier can additionally read
per-turn traces. The student-facing message schema has no field that could
carry trace content. An optional JSON Lines journal records every exchange
(with its trace) for crash recovery of transcripts.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Depends, FastAPI, Header, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .config import AppConfig, inspector_token as env_inspector_token
from .config import student_token as env_student_token
from .conversation import trace_to_dict
from .dataset import QuestionRecord
from .evaluation import (
    METRIC_CODE_COMPILATION,
    METRICS,
    CaseJudgment,
    IncompleteRecord,
    TestCase,
    aggregate,
    append_label,
    apply_labels,
    case_to_dict,
    format_report,
    judge_case,
    judgment_to_dict,
    report_to_dict,
)
from .orchestrator import ProtocolFailure, Session, SessionFinished
from .prompts import PromptLibrary
from .sandbox import Sandbox

TIER_STUDENT = "student"
TIER_INSPECTOR = "inspector"


class StartSessionBody(BaseModel):
    question_id: str | None = None
    question: str | None = None
    detailed_solution: str | None = None
    solution_outline: str | None = None
    case_id: str | None = None


class MessageBody(BaseModel):
    text: str


class LabelItem(BaseModel):
    metric: str
    value: int | None = None
    note: str = ""


class JudgmentBody(BaseModel):
    case_id: str
    labels: list[LabelItem]
    events: list[int] | None = None


@dataclass
class _Entry:
    session: Session
    case_id: str | None
    created_at: float
    lock: threading.Lock = field(default_factory=threading.Lock)


def create_app(
    backend,
    *,
    questions: list[QuestionRecord] | None = None,
    cases: list[TestCase] | None = None,
    config: AppConfig | None = None,
    prompts: PromptLibrary | None = None,
    sandbox: Sandbox | None = None,
    judgments_path: Path | str | None = None,
    journal_path: Path | str | None = None,
    student_token: str | None = None,
    inspector_token: str | None = None,
    clock=time.time,
) -> FastAPI:
    """Build the service around a backend and an optional question corpus."""
    config = config or AppConfig()
    prompts = prompts or config.prompt_library()
    sandbox = sandbox or Sandbox(config.execution_limits())
    question_index = {record.id: record for record in (questions or [])}
    case_index = {case.case_id: case for case in (cases or [])}
    resolved_student = student_token if student_token is not None else env_student_token()
    resolved_inspector = (
        inspector_token if inspector_token is not None else env_inspector_token()
    )
    if resolved_student == resolved_inspector:
        raise ValueError("student and inspector tokens must differ")
    tokens = {resolved_student: TIER_STUDENT, resolved_inspector: TIER_INSPECTOR}
    entries: dict[str, _Entry] = {}
    journal_lock = threading.Lock()

    app = FastAPI(title="soliloquy tutoring service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def authenticate(authorization: str | None = Header(default=None)) -> str:
        if authorization is None or not authorization.startswith("Bearer "):
            raise HTTPException(status_code=401, detail="missing bearer token")
        tier = tokens.get(authorization[len("Bearer "):])
        if tier is None:
            raise HTTPException(status_code=401, detail="unknown token")
        return tier

    def entry_or_404(session_id: str) -> _Entry:
        entry = entries.get(session_id)
        if entry is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return entry

    def journal_write(event: dict) -> None:
        if journal_path is None:
            return
        with journal_lock:
            with open(journal_path, "a", encoding="utf-8") as handle:
                handle.write(json.dumps(event, ensure_ascii=False, sort_keys=True) + "\n")

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def start_session(body: StartSessionBody, tier: str = Depends(authenticate)) -> dict:
        if body.question_id is not None:
            record = question_index.get(body.question_id)
            if record is None:
                raise HTTPException(status_code=404, detail="unknown question")
            if record.enriched is None:
                raise HTTPException(status_code=422, detail="question not enriched")
            question = record.question
            detailed = record.enriched.detailed
            outline = record.enriched.outline
            question_id = record.id
        else:
            if not body.question or not body.detailed_solution:
                raise HTTPException(
                    status_code=422, detail="inline sessions need question and solution"
                )
            question = body.question
            detailed = body.detailed_solution
            outline = body.solution_outline or ""
            question_id = "inline"
        if body.case_id is not None and body.case_id not in case_index:
            raise HTTPException(status_code=404, detail="unknown case")
        session_id = uuid.uuid4().hex
        session = Session(
            backend,
            question=question,
            detailed_solution=detailed,
            solution_outline=outline,
            conversation_id=session_id,
            question_id=question_id,
            config=config.engine_config(),
            prompts=prompts,
            sandbox=sandbox,
            clock=clock,
        )
        entry = _Entry(session=session, case_id=body.case_id, created_at=float(clock()))
        entries[session_id] = entry
        journal_write(
            {
                "event": "created",
                "session_id": session_id,
                "question_id": question_id,
                "case_id": body.case_id,
                "created_at": entry.created_at,
            }
        )
        return {
            "session_id": session_id,
            "question_id": question_id,
            "created_at": entry.created_at,
            "finished": False,
        }

    @app.post("/sessions/{session_id}/messages")
    def post_message(
        session_id: str, body: MessageBody, tier: str = Depends(authenticate)
    ) -> dict:
        entry = entry_or_404(session_id)
        if not body.text.strip():
            raise HTTPException(status_code=422, detail="message text must be non-empty")
        if not entry.lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="a step is already in flight")
        try:
            if entry.session.finished:
                raise HTTPException(status_code=409, detail="session is finished")
            try:
                entry.session.student_says(body.text)
                trace = entry.session.tutor_respond()
            except SessionFinished:
                raise HTTPException(status_code=409, detail="session is finished")
            except ProtocolFailure as exc:
                raise HTTPException(
                    status_code=502,
                    detail={
                        "stage": exc.stage,
                        "attempts": exc.attempts,
                        "error": exc.last_error,
                    },
                )
        finally:
            entry.lock.release()
        journal_write(
            {
                "event": "exchange",
                "session_id": session_id,
                "student_text": body.text,
                "trace": trace_to_dict(trace),
            }
        )
        # Fixed schema: nothing here can carry hidden trace content.
        return {
            "response": trace.turn.response,
            "step_state": trace.turn.step_state.value,
            "finished": entry.session.finished,
        }

    @app.get("/sessions/{session_id}/trace/{turn}")
    def get_trace(
        session_id: str, turn: int, tier: str = Depends(authenticate)
    ) -> dict:
        if tier != TIER_INSPECTOR:
            raise HTTPException(status_code=403, detail="inspector token required")
        entry = entry_or_404(session_id)
        # The API counts tutor turns from zero; traces are keyed from one.
        trace = entry.session.traces.get(turn + 1)
        if turn < 0 or trace is None:
            raise HTTPException(status_code=404, detail="no such turn")
        return trace_to_dict(trace)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str, tier: str = Depends(authenticate)) -> dict:
        entry = entry_or_404(session_id)
        return {
            "session_id": session_id,
            "question_id": entry.session.question_id,
            "question": entry.session.question,
            "case_id": entry.case_id,
            "finished": entry.session.finished,
            "turns": [
                {"speaker": turn.speaker, "text": turn.text}
                for turn in entry.session.visible_turns
            ],
        }

    @app.get("/cases")
    def get_cases(tier: str = Depends(authenticate)) -> list:
        return [case_to_dict(case) for case in case_index.values()]

    @app.get("/sessions/{session_id}/judgment")
    def get_auto_judgment(session_id: str, tier: str = Depends(authenticate)) -> dict:
        entry = entry_or_404(session_id)
        if entry.case_id is None:
            raise HTTPException(status_code=404, detail="session has no attached case")
        case = case_index[entry.case_id]
        try:
            judgment = judge_case(case, entry.session.snapshot())
        except IncompleteRecord as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return judgment_to_dict(judgment)

    @app.post("/judgments", status_code=201)
    def post_judgment(body: JudgmentBody, tier: str = Depends(authenticate)) -> dict:
        if judgments_path is None:
            raise HTTPException(status_code=503, detail="no judgments journal configured")
        if body.case_id not in case_index:
            raise HTTPException(status_code=404, detail="unknown case")
        for item in body.labels:
            if item.metric not in METRICS:
                raise HTTPException(
                    status_code=422, detail=f"unknown metric {item.metric!r}"
                )
            if item.value not in (0, 1, None):
                raise HTTPException(status_code=422, detail="value must be 0, 1, or null")
        events = None
        if body.events is not None:
            if len(body.events) != 2 or not 0 <= body.events[0] <= body.events[1]:
                raise HTTPException(status_code=422, detail="malformed events pair")
            events = (body.events[0], body.events[1])
        with journal_lock:
            if events is not None:
                append_label(
                    judgments_path,
                    body.case_id,
                    METRIC_CODE_COMPILATION,
                    1 if events[0] == events[1] else 0,
                    events=events,
                )
            for item in body.labels:
                append_label(
                    judgments_path, body.case_id, item.metric, item.value, item.note
                )
        return {"case_id": body.case_id, "labels": len(body.labels)}

    @app.get("/report")
    def get_report(tier: str = Depends(authenticate)) -> dict:
        judgments = [CaseJudgment(case_id=case_id) for case_id in case_index]
        if judgments_path is not None and Path(judgments_path).exists():
            apply_labels(judgments, judgments_path)
        report = aggregate(judgments)
        raw = report_to_dict(report)
        raw["formatted"] = format_report(report)
        return raw

    return app


def recover_transcripts(journal_path: Path | str) -> dict[str, list[dict]]:
    """Rebuild per-session exchange history from a service journal."""
    transcripts: dict[str, list[dict]] = {}
    with open(journal_path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            event = json.loads(line)
            if event["event"] == "created":
                transcripts.setdefault(event["session_id"], [])
            elif event["event"] == "exchange":
                transcripts.setdefault(event["session_id"], []).append(
                    {
                        "student_text": event["student_text"],
                        "trace": event["trace"],
                    }
                )
    return transcripts
