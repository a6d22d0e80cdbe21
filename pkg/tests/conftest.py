"""Shared fixtures: a deterministic simulated run and small reusable corpora."""

from __future__ import annotations

import pytest

from soliloquy.conversation import Conversation
from soliloquy.dataset import QuestionRecord
from soliloquy.orchestrator import EngineConfig, StudentPolicy
from soliloquy.prompts import default_library
from soliloquy.sandbox import ExecutionLimits, Sandbox
from soliloquy.testing import SimulatedModel

QUESTION = "A stone is dropped from rest. What is its speed after 2 s?"
DETAILED_SOLUTION = (
    "Step 1) Identify the known quantities: g = 9.8 m/s^2, t = 2 s.\n"
    "Step 2) Apply v = g * t for free fall from rest.\n"
    "Step 3) Compute v = 9.8 * 2 = 19.6 m/s."
)
SOLUTION_OUTLINE = (
    "Step 1) List knowns. Step 2) Pick v = g * t. Step 3) v = 19.6 m/s."
)


@pytest.fixture(scope="session")
def prompts():
    return default_library()


@pytest.fixture(scope="session")
def sandbox():
    return Sandbox(ExecutionLimits(timeout_s=5.0))


@pytest.fixture
def engine_config():
    return EngineConfig()


def make_questions(count: int = 3, enriched: bool = True) -> list[QuestionRecord]:
    from soliloquy.protocol import EnrichedSolution

    records = []
    for index in range(count):
        enrichment = (
            EnrichedSolution(detailed=DETAILED_SOLUTION, outline=SOLUTION_OUTLINE)
            if enriched
            else None
        )
        records.append(
            QuestionRecord(
                id=f"q{index + 1:02d}",
                question=f"{QUESTION} (variant {index + 1})",
                sme_solution="v = g t = 19.6 m/s",
                topic="kinematics",
                enriched=enrichment,
            )
        )
    return records


@pytest.fixture
def questions():
    return make_questions()


def run_simulated(
    seed: int = 0,
    *,
    turns_to_finish: int = 3,
    misbehave_rate: float = 0.0,
    error_rate: float = 0.0,
    max_visible_turns: int = 40,
    max_repairs: int = 3,
    prompts=None,
    sandbox=None,
) -> Conversation:
    from soliloquy.orchestrator import run_mock_conversation

    backend = SimulatedModel(
        seed=seed, turns_to_finish=turns_to_finish, misbehave_rate=misbehave_rate
    )
    config = EngineConfig(max_visible_turns=max_visible_turns, max_repairs=max_repairs)
    policy = StudentPolicy(error_rate=error_rate, seed=seed)
    return run_mock_conversation(
        backend,
        question=QUESTION,
        detailed_solution=DETAILED_SOLUTION,
        solution_outline=SOLUTION_OUTLINE,
        conversation_id=f"sim-{seed}",
        question_id="q01",
        config=config,
        prompts=prompts or default_library(),
        sandbox=sandbox or Sandbox(ExecutionLimits(timeout_s=5.0)),
        student_policy=policy,
        clock=lambda: 0.0,
    )


@pytest.fixture(scope="session")
def simulated_conversation(prompts, sandbox):
    """One cached complete run; tests must not mutate it."""
    return run_simulated(seed=0, prompts=prompts, sandbox=sandbox)
