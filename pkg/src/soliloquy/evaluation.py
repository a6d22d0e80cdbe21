"""Paired-case evaluation: four binary metrics aggregated into a report.

Each question is tested twice, once with a correct and once with an
incorrect injected answer. Per case, compilation is judged automatically
from the recorded traces; the usage metrics get automatic proposals an SME
may override; calculation verification is SME-only. Labels live in an
append-only JSON Lines journal where the last write wins. Compilation is
aggregated per code-generation event, not per case, so its denominator can
exceed the case count.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .conversation import Conversation, STATUS_FAILED
from .prompts import STUDENT_SPEAKER_LABEL
from .sandbox import check_compiles

METRIC_PYTHON_USAGE = "python_usage_accuracy"
METRIC_NON_USAGE = "non_usage_of_python"
METRIC_CODE_COMPILATION = "code_compilation"
METRIC_CALCULATION_VERIFICATION = "calculation_verification"

# Report column order.
METRICS = (
    METRIC_PYTHON_USAGE,
    METRIC_NON_USAGE,
    METRIC_CODE_COMPILATION,
    METRIC_CALCULATION_VERIFICATION,
)

SOURCE_AUTO = "auto"
SOURCE_SME = "sme"

ANSWER_CORRECT = "correct"
ANSWER_INCORRECT = "incorrect"

_NUMERIC = re.compile(r"\d")


class MissingAnswer(Exception):
    def __init__(self, question_id: str):
        super().__init__(f"question {question_id!r} lacks a correct/incorrect answer pair")
        self.question_id = question_id


class IncompleteRecord(Exception):
    def __init__(self, case_id: str, reason: str):
        super().__init__(f"case {case_id!r}: {reason}")
        self.case_id = case_id


@dataclass(frozen=True)
class TestCase:
    """One scripted probe: a question with a known-good or known-bad answer."""

    __test__ = False  # not a pytest class, despite the name

    case_id: str
    question_id: str
    injected_answer: str
    answer_kind: str
    scripted_student_turns: tuple[str, ...] = ()

    def __post_init__(self):
        if self.answer_kind not in (ANSWER_CORRECT, ANSWER_INCORRECT):
            raise ValueError(f"unknown answer kind {self.answer_kind!r}")
        if not self.injected_answer:
            raise ValueError("injected answer must be non-empty")


@dataclass
class MetricEntry:
    value: int
    source: str
    note: str = ""

    def __post_init__(self):
        if self.value not in (0, 1):
            raise ValueError("metric value must be 0 or 1")
        if self.source not in (SOURCE_AUTO, SOURCE_SME):
            raise ValueError(f"unknown source {self.source!r}")


@dataclass
class CaseJudgment:
    """Per-case metric entries; None marks a metric not applicable."""

    case_id: str
    entries: dict[str, MetricEntry | None] = field(
        default_factory=lambda: {metric: None for metric in METRICS}
    )
    compilation_events: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if set(self.entries) != set(METRICS):
            raise ValueError("entries must cover exactly the four metrics")
        ok, total = self.compilation_events
        if not 0 <= ok <= total:
            raise ValueError("compilation events must satisfy 0 <= ok <= total")


def build_cases(
    question_ids: list[str], answers: dict[str, dict[str, str]]
) -> list[TestCase]:
    """Two cases per question, correct first; fails fast on a missing answer."""
    cases: list[TestCase] = []
    for question_id in question_ids:
        pair = answers.get(question_id, {})
        if ANSWER_CORRECT not in pair or ANSWER_INCORRECT not in pair:
            raise MissingAnswer(question_id)
        for kind in (ANSWER_CORRECT, ANSWER_INCORRECT):
            answer = pair[kind]
            cases.append(
                TestCase(
                    case_id=f"{question_id}-{kind}",
                    question_id=question_id,
                    injected_answer=answer,
                    answer_kind=kind,
                    scripted_student_turns=(
                        f"I worked through it and my answer is {answer}.",
                    ),
                )
            )
    return cases


def _answering_trace(conversation: Conversation, student_index: int):
    """The trace for the tutor turn that answers the given student turn."""
    return conversation.traces[student_index // 2 + 1]


def judge_case(case: TestCase, record: Conversation) -> CaseJudgment:
    """Automatic judgment of one case from its session record.

    Compilation is definitive; the usage metrics are proposals derived from
    whether numeric student turns triggered code and prose turns did not.
    Calculation verification always awaits an SME label.
    """
    if record.status == STATUS_FAILED:
        raise IncompleteRecord(case.case_id, "session failed before completion")
    if not record.traces:
        raise IncompleteRecord(case.case_id, "no tutor turns to judge")

    ok = total = 0
    for trace in record.traces.values():
        if trace.artifact is not None:
            total += 1
            ok += 1 if check_compiles(trace.artifact.code) else 0

    numeric_used: list[bool] = []
    prose_stayed: list[bool] = []
    for index, turn in enumerate(record.visible_turns):
        if turn.speaker != STUDENT_SPEAKER_LABEL:
            continue
        if index // 2 + 1 not in record.traces:
            continue
        used = _answering_trace(record, index).decision.use_python
        if _NUMERIC.search(turn.text):
            numeric_used.append(used)
        else:
            prose_stayed.append(not used)

    entries: dict[str, MetricEntry | None] = {metric: None for metric in METRICS}
    if total:
        entries[METRIC_CODE_COMPILATION] = MetricEntry(
            value=1 if ok == total else 0, source=SOURCE_AUTO
        )
    if numeric_used:
        entries[METRIC_PYTHON_USAGE] = MetricEntry(
            value=1 if all(numeric_used) else 0, source=SOURCE_AUTO
        )
    if prose_stayed:
        entries[METRIC_NON_USAGE] = MetricEntry(
            value=1 if all(prose_stayed) else 0, source=SOURCE_AUTO
        )
    return CaseJudgment(
        case_id=case.case_id, entries=entries, compilation_events=(ok, total)
    )


def append_label(
    path: Path | str,
    case_id: str,
    metric: str,
    value: int | None,
    note: str = "",
    events: tuple[int, int] | None = None,
) -> None:
    """Append one SME label to the journal; value None records n/a."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    raw: dict = {"case_id": case_id, "metric": metric, "value": value}
    if note:
        raw["note"] = note
    if events is not None:
        raw["events"] = {"ok": events[0], "total": events[1]}
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(json.dumps(raw, ensure_ascii=False, sort_keys=True) + "\n")


def apply_labels(judgments: list[CaseJudgment], path: Path | str) -> None:
    """Overlay journal labels onto judgments in journal order (last wins).

    A label may carry ``events`` for code_compilation to set the per-event
    counts; lines for unknown case ids are ignored so journals can span
    several case files.
    """
    by_id = {judgment.case_id: judgment for judgment in judgments}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            raw = json.loads(line)
            metric = raw["metric"]
            if metric not in METRICS:
                raise ValueError(f"unknown metric {metric!r} in label journal")
            judgment = by_id.get(raw["case_id"])
            if judgment is None:
                continue
            events = raw.get("events")
            if events is not None:
                if metric != METRIC_CODE_COMPILATION:
                    raise ValueError("events are only valid for code_compilation")
                judgment.compilation_events = (events["ok"], events["total"])
            value = raw["value"]
            if value is None:
                judgment.entries[metric] = None
            else:
                judgment.entries[metric] = MetricEntry(
                    value=value, source=SOURCE_SME, note=raw.get("note", "")
                )


@dataclass(frozen=True)
class MetricsReport:
    means: dict[str, float]
    numerators: dict[str, int]
    denominators: dict[str, int]
    case_count: int


def aggregate(judgments: list[CaseJudgment]) -> MetricsReport:
    """Per-metric means with exact fractions; order-independent.

    The three case-level metrics average over cases with an applicable
    entry; compilation averages over code-generation events.
    """
    numerators = {metric: 0 for metric in METRICS}
    denominators = {metric: 0 for metric in METRICS}
    for judgment in judgments:
        for metric in (
            METRIC_PYTHON_USAGE,
            METRIC_NON_USAGE,
            METRIC_CALCULATION_VERIFICATION,
        ):
            entry = judgment.entries[metric]
            if entry is not None:
                numerators[metric] += entry.value
                denominators[metric] += 1
        ok, total = judgment.compilation_events
        numerators[METRIC_CODE_COMPILATION] += ok
        denominators[METRIC_CODE_COMPILATION] += total
    means = {
        metric: (numerators[metric] / denominators[metric]) if denominators[metric] else 0.0
        for metric in METRICS
    }
    return MetricsReport(
        means=means,
        numerators=numerators,
        denominators=denominators,
        case_count=len(judgments),
    )


def format_value(value: float) -> str:
    """Two decimals with a single trailing zero dropped: 1.0, 0.97, 0.88."""
    text = f"{value:.2f}"
    return text[:-1] if text.endswith("0") else text


def format_report(report: MetricsReport) -> str:
    """Fixed-width table in report column order plus a one-line summary."""
    width = max(len(metric) for metric in METRICS)
    lines = [f"{'metric'.ljust(width)}  value  fraction"]
    for metric in METRICS:
        fraction = f"{report.numerators[metric]}/{report.denominators[metric]}"
        value = format_value(report.means[metric])
        lines.append(f"{metric.ljust(width)}  {value:<5}  {fraction}")
    lines.append(f"cases judged: {report.case_count}")
    lines.append(" / ".join(format_value(report.means[metric]) for metric in METRICS))
    return "\n".join(lines)


def case_to_dict(case: TestCase) -> dict:
    return {
        "case_id": case.case_id,
        "question_id": case.question_id,
        "injected_answer": case.injected_answer,
        "answer_kind": case.answer_kind,
        "scripted_student_turns": list(case.scripted_student_turns),
    }


def case_from_dict(raw: dict) -> TestCase:
    return TestCase(
        case_id=raw["case_id"],
        question_id=raw["question_id"],
        injected_answer=raw["injected_answer"],
        answer_kind=raw["answer_kind"],
        scripted_student_turns=tuple(raw.get("scripted_student_turns", ())),
    )


def save_cases(cases: list[TestCase], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for case in cases:
            handle.write(json.dumps(case_to_dict(case), ensure_ascii=False, sort_keys=True) + "\n")


def load_cases(path: Path | str) -> list[TestCase]:
    cases: list[TestCase] = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                cases.append(case_from_dict(json.loads(line)))
    return cases


def judgment_to_dict(judgment: CaseJudgment) -> dict:
    return {
        "case_id": judgment.case_id,
        "entries": {
            metric: (
                None
                if entry is None
                else {"value": entry.value, "source": entry.source, "note": entry.note}
            )
            for metric, entry in judgment.entries.items()
        },
        "compilation_events": list(judgment.compilation_events),
    }


def judgment_from_dict(raw: dict) -> CaseJudgment:
    entries = {
        metric: (
            None
            if entry is None
            else MetricEntry(
                value=entry["value"], source=entry["source"], note=entry.get("note", "")
            )
        )
        for metric, entry in raw["entries"].items()
    }
    events = raw.get("compilation_events", (0, 0))
    return CaseJudgment(
        case_id=raw["case_id"],
        entries=entries,
        compilation_events=(events[0], events[1]),
    )


def report_to_dict(report: MetricsReport) -> dict:
    return {
        "means": dict(report.means),
        "numerators": dict(report.numerators),
        "denominators": dict(report.denominators),
        "case_count": report.case_count,
    }
