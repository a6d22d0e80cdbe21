"""Prompt templates for the simulated student and the four tutor dialogue states.

Templates are plain UTF-8 text assets with ``{name}`` placeholders (literal
braces doubled), loaded once at startup from the packaged asset directory or
from a directory override. Rendering is plain substitution; there is no
templating language.
"""

from __future__ import annotations

import hashlib
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping


class TemplateId(str, Enum):
    STUDENT = "student"
    DECIDING = "deciding"
    USE_PYTHON = "use_python"
    RECEIVED_PYTHON = "received_python"
    NO_PYTHON = "no_python"
    ENRICH_SOLUTION = "enrich_solution"


# Placeholders each template must be given. Extra bindings are ignored.
REQUIRED_BINDINGS: dict[TemplateId, frozenset[str]] = {
    TemplateId.STUDENT: frozenset({"question", "history"}),
    TemplateId.DECIDING: frozenset({"question", "solution", "history"}),
    TemplateId.USE_PYTHON: frozenset({"description"}),
    TemplateId.RECEIVED_PYTHON: frozenset(
        {"question", "solution", "history", "description", "python_output"}
    ),
    TemplateId.NO_PYTHON: frozenset({"question", "solution", "history"}),
    TemplateId.ENRICH_SOLUTION: frozenset({"question", "solution"}),
}

STUDENT_SPEAKER_LABEL = "Student"
TUTOR_SPEAKER_LABEL = "Tutorbot"


class UnknownTemplate(Exception):
    def __init__(self, name: object):
        super().__init__(f"unknown template {name!r}")
        self.name = name


class MissingBinding(Exception):
    def __init__(self, name: str):
        super().__init__(f"template requires binding {name!r}")
        self.name = name


def _coerce_template_id(template: TemplateId | str) -> TemplateId:
    try:
        return TemplateId(template)
    except ValueError:
        raise UnknownTemplate(template) from None


class PromptLibrary:
    """All six templates, loaded eagerly and immutable afterwards."""

    def __init__(self, directory: Path | str | None = None):
        self._templates: dict[TemplateId, str] = {}
        if directory is None:
            root = resources.files("soliloquy").joinpath("prompt_assets")
            for template_id in TemplateId:
                text = root.joinpath(f"{template_id.value}.txt").read_text(encoding="utf-8")
                self._templates[template_id] = text
        else:
            directory = Path(directory)
            for template_id in TemplateId:
                path = directory / f"{template_id.value}.txt"
                self._templates[template_id] = path.read_text(encoding="utf-8")

    def template(self, template: TemplateId | str) -> str:
        return self._templates[_coerce_template_id(template)]

    def render(self, template: TemplateId | str, bindings: Mapping[str, str]) -> str:
        """Substitute placeholders; fails on any missing required binding."""
        template_id = _coerce_template_id(template)
        required = REQUIRED_BINDINGS[template_id]
        for name in sorted(required):
            if name not in bindings:
                raise MissingBinding(name)
        values = {name: str(bindings[name]) for name in required}
        return self._templates[template_id].format_map(values)

    def checksums(self) -> dict[str, str]:
        """SHA-256 of each template's exact bytes, keyed by template name."""
        return {
            template_id.value: hashlib.sha256(text.encode("utf-8")).hexdigest()
            for template_id, text in self._templates.items()
        }


@lru_cache(maxsize=1)
def default_library() -> PromptLibrary:
    return PromptLibrary()


def render(template: TemplateId | str, bindings: Mapping[str, str]) -> str:
    return default_library().render(template, bindings)


def serialize_history(conversation, audience: str = "student") -> str:
    """Render the visible dialogue as alternating speaker-labeled lines.

    Accepts a conversation or any iterable of visible turns. Both audiences
    see exactly the visible turns: the hidden sub-dialogue is never part of
    history. The tutor receives its own hidden context through the per-state
    prompt bindings instead.
    """
    if audience not in ("student", "tutorbot"):
        raise ValueError(f"unknown audience {audience!r}")
    turns = getattr(conversation, "visible_turns", conversation)
    lines = []
    for turn in turns:
        if turn.speaker not in (STUDENT_SPEAKER_LABEL, TUTOR_SPEAKER_LABEL):
            raise ValueError(f"unknown speaker {turn.speaker!r}")
        lines.append(f"{turn.speaker}: {turn.text}")
    return "\n".join(lines)
