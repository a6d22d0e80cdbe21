"""A deterministic fake model for exercising the engine end to end.

``SimulatedModel`` is a chat backend that recognizes which prompt it was
given (student, one of the tutor states, or solution enrichment) and plays
the matching role with plausible, fully deterministic replies. Generated
code really runs in the sandbox, so the dialogue's numbers are genuine.
A configurable misbehave rate yields malformed replies that the repair
loop must catch, followed by a compliant retry.
"""

from __future__ import annotations

import json
import re
from random import Random
from typing import Sequence

from .backends import ChatMessage, CompletionParams

_FLOAT = re.compile(r"\d+(?:\.\d+)?")
_DESCRIPTION = re.compile(r'calculation is the following:\s*"([^"]*)"')
_ERROR_DIRECTIVE = "Generate an incorrect response in this way:"

# Anchor phrases identifying each prompt; all are template-constant text.
_ANCHOR_STUDENT = "You are a high school student"
_ANCHOR_CODEGEN = "You are an AI-powered code generation bot"
_ANCHOR_DECIDING = 'If you choose not to use python ("n")'
_ANCHOR_RECEIVED = "The output from Tutorbot's Python code is the following:"
_ANCHOR_ENRICH = "Given a textbook problem and its textbook solution"
_ANCHOR_TUTOR = "You are a Tutorbot"

_WRONG_VALUES = ("12.3", "24.5", "15.8", "9.6")

_DETAILED_SOLUTION = (
    "Step 1) State the known values: the acceleration g = 9.8 m/s^2 and the "
    "fall time t = 2 s.\n"
    "Step 2) Choose the equation for an object falling from rest: v = g * t.\n"
    "Step 3) Substitute the known values: v = 9.8 * 2 = 19.6 m/s."
)
_SOLUTION_OUTLINE = (
    "Step 1) List the known values.\n"
    "Step 2) Pick the equation v = g * t.\n"
    "Step 3) Substitute and state v = 19.6 m/s."
)


class SimulatedModel:
    """Plays every role the engine can ask for, deterministically."""

    kind = "simulated"

    def __init__(
        self,
        seed: int = 0,
        turns_to_finish: int = 3,
        misbehave_rate: float = 0.0,
    ):
        if turns_to_finish < 2:
            raise ValueError("turns_to_finish must be at least 2")
        if not 0.0 <= misbehave_rate <= 1.0:
            raise ValueError("misbehave_rate must lie in [0, 1]")
        self.turns_to_finish = turns_to_finish
        self.misbehave_rate = misbehave_rate
        self._rng = Random(seed)
        self.calls = 0

    def complete(self, messages: Sequence[ChatMessage], params: CompletionParams) -> str:
        self.calls += 1
        prompt = messages[0].content
        repairing = len(messages) > 1
        if not repairing and self._rng.random() < self.misbehave_rate:
            return self._misbehave(prompt)
        if _ANCHOR_STUDENT in prompt:
            return self._student(prompt)
        if _ANCHOR_CODEGEN in prompt:
            return self._codegen(prompt)
        if _ANCHOR_DECIDING in prompt:
            return self._deciding(prompt)
        if _ANCHOR_RECEIVED in prompt:
            return self._received_python(prompt)
        if _ANCHOR_ENRICH in prompt:
            return self._enrich()
        if _ANCHOR_TUTOR in prompt:
            return self._no_python(prompt)
        raise AssertionError("unrecognized prompt")

    def _misbehave(self, prompt: str) -> str:
        if _ANCHOR_STUDENT in prompt:
            return ""
        return "Let me think about the best way to respond to the student here."

    @staticmethod
    def _last_line(prompt: str, label: str) -> str:
        # Templates wrap the history block in double quotes, so the first
        # and last history lines carry one stray quote each.
        lines = []
        for line in prompt.splitlines():
            stripped = line.lstrip('"')
            if stripped.startswith(label):
                lines.append(stripped[len(label):].rstrip('"').strip())
        return lines[-1] if lines else ""

    def _student(self, prompt: str) -> str:
        if "Student: " not in prompt:
            return "Hi, I'm stuck on this problem. Can you help me get started?"
        if _ERROR_DIRECTIVE in prompt:
            wrong = self._rng.choice(_WRONG_VALUES)
            return f"I worked it out and got {wrong} m/s."
        last_tutor = self._last_line(prompt, "Tutorbot: ")
        if "Not quite" in last_tutor:
            return "Oh, I see my mistake. It should be v = 9.8 * 2 = 19.6 m/s."
        return "I think the formula is v = g * t, so v = 9.8 * 2 = 19.6 m/s."

    def _deciding(self, prompt: str) -> str:
        last_student = self._last_line(prompt, "Student: ")
        numbers = _FLOAT.findall(last_student)
        if not numbers:
            return json.dumps({"Use Python": "n"})
        claimed = numbers[-1]
        description = (
            f"Verify the student's claimed final speed of {claimed} m/s for an "
            "object falling from rest for 2 seconds. Compute the true speed "
            "with v = g * t, where g = 9.8 m/s^2 and t = 2 s, store it in v, "
            "and compare the student's claimed value against v."
        )
        return json.dumps({"Use Python": "y", "Description": description})

    def _codegen(self, prompt: str) -> str:
        match = _DESCRIPTION.search(prompt)
        source = match.group(1) if match else ""
        numbers = _FLOAT.findall(source.split("claimed", 1)[-1])
        claimed = numbers[0] if numbers else "0.0"
        code = (
            "import math\n"
            "# known values from the problem\n"
            "g = 9.8\n"
            "t = 2\n"
            "# true speed after t seconds of free fall\n"
            "v = g * t\n"
            f"student_v = {claimed}\n"
            "is_correct = math.isclose(v, student_v, rel_tol=0.01)"
        )
        return json.dumps(
            {
                "Python": {
                    "Python Code": f"``` python\n{code}\n```",
                    "Result Variable": "v, is_correct",
                }
            }
        )

    def _received_python(self, prompt: str) -> str:
        correct = "is_correct = True" in prompt
        students = prompt.count("Student: ")
        step = str(min(prompt.count("Tutorbot: ") + 1, 3))
        if correct and students >= self.turns_to_finish:
            evaluation, action, state = "b", 3, "t"
            response = (
                "That's right, the speed comes out to 19.6 m/s. "
                "Great work, that completes the problem."
            )
            thoughts = (
                "verdict-hidden: the Python check confirmed the claim and no "
                "steps remain, so close out the problem."
            )
        elif correct:
            evaluation, action, state = "b", 3, "r"
            response = (
                "Nice, 19.6 m/s matches my calculation. Now express that "
                "result clearly with its units to wrap up."
            )
            thoughts = (
                "verdict-hidden: the Python check confirmed the claim, so "
                "approve it and move to the next step."
            )
        else:
            evaluation, action, state = "a", 1, "q"
            response = (
                "Not quite. Re-check how you substitute the time into the "
                "formula and try the calculation again."
            )
            thoughts = (
                "verdict-hidden: the Python check refuted the claim, so ask "
                "for another attempt without revealing the answer."
            )
        return json.dumps(
            {
                "Thoughts of Tutorbot": thoughts,
                "Evaluation of Student Response": evaluation,
                "Action Based on Evaluation": action,
                "Step Number": step,
                "Step State": state,
                "Tutorbot Response": response,
            }
        )

    def _no_python(self, prompt: str) -> str:
        return json.dumps(
            {
                "Thoughts of Tutorbot": (
                    "planning-hidden: no attempt to evaluate yet, so point the "
                    "student at the velocity relation without solving it."
                ),
                "Evaluation of Student Response": "g",
                "Action Based on Evaluation": 12,
                "Step Number": "1",
                "Step State": "p",
                "Tutorbot Response": (
                    "Happy to help. Start by writing the relationship between "
                    "speed, gravitational acceleration, and fall time."
                ),
            }
        )

    def _enrich(self) -> str:
        return json.dumps(
            {
                "Detailed Solution": _DETAILED_SOLUTION,
                "Solution Outline": _SOLUTION_OUTLINE,
            }
        )
