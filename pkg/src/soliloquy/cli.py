"""Command-line surface: enrich, generate, export, eval, tutor, serve."""

from __future__ import annotations

import sys
import time

import click

from .backends import HttpChatBackend, RecordingBackend, load_fixture
from .config import api_key, load_config
from .dataset import (
    enrich_corpus,
    export_finetune,
    generate_corpus,
    import_transcripts,
    load_questions,
    save_questions,
)
from .evaluation import (
    CaseJudgment,
    IncompleteRecord,
    aggregate,
    apply_labels,
    format_report,
    judge_case,
    load_cases,
)
from .orchestrator import (
    ProtocolFailure,
    Session,
    SessionFinished,
    StudentPolicy,
    step_soliloquy,
)
from .sandbox import Sandbox
from .testing import SimulatedModel

_BACKENDS = ("sim", "replay", "http")


def _build_backend(kind: str, fixture: str | None, seed: int, config, record: str | None):
    if kind == "sim":
        backend = SimulatedModel(seed=seed)
    elif kind == "replay":
        if fixture is None:
            raise click.ClickException("--fixture is required with --backend replay")
        backend = load_fixture(fixture)
    else:
        key = api_key()
        if key is None:
            raise click.ClickException(
                "http backend needs an API key in SOLILOQUY_API_KEY"
            )
        backend = HttpChatBackend(base_url=config.base_url, api_key=key)
    if record is not None:
        backend = RecordingBackend(backend, record)
    return backend


def _clock_for(kind: str):
    # Replayed and simulated runs get a fixed clock so reruns are
    # byte-identical; only live http runs record wall-clock time.
    return time.time if kind == "http" else (lambda: 0.0)


@click.group()
def main() -> None:
    """Calculation-accurate tutoring dialogues with a hidden code loop."""


@main.command()
@click.option("--questions", "questions_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path(), help="Defaults to rewriting the input file.")
@click.option("--backend", "backend_kind", default="sim", type=click.Choice(_BACKENDS))
@click.option("--fixture", default=None, type=click.Path(exists=True))
@click.option("--record", default=None, type=click.Path())
@click.option("--seed", default=0, type=int)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--force", is_flag=True, help="Re-enrich records that already have one.")
def enrich(questions_path, out_path, backend_kind, fixture, record, seed, config_path, force):
    """Fill in step-by-step enrichments for a question corpus."""
    config = load_config(config_path)
    backend = _build_backend(backend_kind, fixture, seed, config, record)
    records = load_questions(questions_path)
    try:
        count = enrich_corpus(records, backend, max_repairs=config.max_repairs, force=force)
    except ProtocolFailure as exc:
        raise click.ClickException(str(exc))
    save_questions(records, out_path or questions_path)
    click.echo(f"enriched {count} of {len(records)} records")


@main.command()
@click.option("--questions", "questions_path", required=True, type=click.Path(exists=True))
@click.option("--total", required=True, type=int)
@click.option("--out", "out_path", default="transcripts.jsonl", type=click.Path())
@click.option("--backend", "backend_kind", default="sim", type=click.Choice(_BACKENDS))
@click.option("--fixture", default=None, type=click.Path(exists=True))
@click.option("--record", default=None, type=click.Path())
@click.option("--seed", default=0, type=int, help="Corpus seed for derived per-conversation seeds.")
@click.option("--error-rate", default=0.10, type=float)
@click.option("--workers", default=1, type=int)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def generate(questions_path, total, out_path, backend_kind, fixture, record, seed, error_rate, workers, config_path):
    """Generate a batch of simulated conversations to a transcript file."""
    config = load_config(config_path)
    records = load_questions(questions_path)
    kwargs = dict(
        policy=StudentPolicy(error_rate=error_rate),
        sandbox=Sandbox(config.execution_limits()),
        config=config.engine_config(),
        prompts=config.prompt_library(),
        corpus_seed=seed,
        out_path=out_path,
        workers=workers,
        clock=_clock_for(backend_kind),
    )
    if backend_kind == "sim" and record is None:
        # Fresh per-conversation models keep parallel runs deterministic.
        produced = generate_corpus(
            records, total, backend_factory=lambda s: SimulatedModel(seed=s), **kwargs
        )
    else:
        if backend_kind == "replay" and workers != 1:
            raise click.ClickException("replay fixtures are ordered; use --workers 1")
        backend = _build_backend(backend_kind, fixture, seed, config, record)
        produced = generate_corpus(records, total, backend=backend, **kwargs)
    failed = sum(1 for conversation in produced if conversation.status == "failed")
    click.echo(f"generated {len(produced)} conversations ({failed} failed) -> {out_path}")


@main.command()
@click.option("--transcripts", "transcripts_path", required=True, type=click.Path(exists=True))
@click.option("--finetune", "finetune_path", required=True, type=click.Path())
@click.option("--include-traces/--no-include-traces", default=True)
@click.option("--include-incomplete", is_flag=True)
def export(transcripts_path, finetune_path, include_traces, include_incomplete):
    """Convert a transcript file into fine-tuning examples."""
    conversations = import_transcripts(transcripts_path)
    written = export_finetune(
        conversations,
        finetune_path,
        include_traces=include_traces,
        include_incomplete=include_incomplete,
    )
    click.echo(f"exported {written} of {len(conversations)} conversations -> {finetune_path}")


@main.command(name="eval")
@click.option("--cases", "cases_path", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", default=None, type=click.Path(exists=True))
@click.option("--transcripts", "transcripts_path", default=None, type=click.Path(exists=True))
def eval_command(cases_path, labels_path, transcripts_path):
    """Judge cases and print the four-metric report."""
    cases = load_cases(cases_path)
    by_conversation = {}
    if transcripts_path is not None:
        for conversation in import_transcripts(transcripts_path):
            by_conversation[conversation.conversation_id] = conversation
    judgments = []
    for case in cases:
        record = by_conversation.get(case.case_id)
        if record is None:
            judgments.append(CaseJudgment(case_id=case.case_id))
            continue
        try:
            judgments.append(judge_case(case, record))
        except IncompleteRecord:
            judgments.append(CaseJudgment(case_id=case.case_id))
    if labels_path is not None:
        apply_labels(judgments, labels_path)
    click.echo(format_report(aggregate(judgments)))


@main.command()
@click.option("--question", required=True)
@click.option("--solution", required=True, help="Detailed step-by-step solution text.")
@click.option("--outline", default="")
@click.option("--backend", "backend_kind", default="sim", type=click.Choice(_BACKENDS))
@click.option("--fixture", default=None, type=click.Path(exists=True))
@click.option("--record", default=None, type=click.Path())
@click.option("--seed", default=0, type=int)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--show-trace", is_flag=True, help="Print the hidden trace after each turn.")
def tutor(question, solution, outline, backend_kind, fixture, record, seed, config_path, show_trace):
    """Chat with the tutor on stdin/stdout, one line per student turn."""
    from .conversation import trace_to_dict
    import json as json_module

    config = load_config(config_path)
    backend = _build_backend(backend_kind, fixture, seed, config, record)
    session = Session(
        backend,
        question=question,
        detailed_solution=solution,
        solution_outline=outline,
        config=config.engine_config(),
        prompts=config.prompt_library(),
        sandbox=Sandbox(config.execution_limits()),
        clock=_clock_for(backend_kind),
    )
    click.echo(f"question: {question}")
    while not session.finished:
        try:
            line = input("Student: ")
        except EOFError:
            break
        if not line.strip():
            continue
        try:
            turn, trace = step_soliloquy(session, line)
        except SessionFinished:
            break
        except ProtocolFailure as exc:
            click.echo(f"(turn failed: {exc}; try rephrasing)", err=True)
            continue
        click.echo(f"Tutorbot: {turn.response}")
        if show_trace:
            click.echo(json_module.dumps(trace_to_dict(trace), indent=2))
    click.echo("session finished" if session.finished else "session closed")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
@click.option("--questions", "questions_path", default=None, type=click.Path(exists=True))
@click.option("--cases", "cases_path", default=None, type=click.Path(exists=True))
@click.option("--judgments", "judgments_path", default=None, type=click.Path())
@click.option("--journal", "journal_path", default=None, type=click.Path())
@click.option("--backend", "backend_kind", default="sim", type=click.Choice(_BACKENDS))
@click.option("--fixture", default=None, type=click.Path(exists=True))
@click.option("--record", default=None, type=click.Path())
@click.option("--seed", default=0, type=int)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def serve(host, port, questions_path, cases_path, judgments_path, journal_path, backend_kind, fixture, record, seed, config_path):
    """Run the HTTP tutoring service."""
    import uvicorn

    from .service import create_app

    config = load_config(config_path)
    backend = _build_backend(backend_kind, fixture, seed, config, record)
    app = create_app(
        backend,
        questions=load_questions(questions_path) if questions_path else None,
        cases=load_cases(cases_path) if cases_path else None,
        config=config,
        judgments_path=judgments_path,
        journal_path=journal_path,
        clock=_clock_for(backend_kind),
    )
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
