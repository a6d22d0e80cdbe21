"""Runtime configuration: settings from a JSON file, credentials from env.

Credentials never live in config files. The API key and the two service
bearer tokens are read from environment variables; everything tunable
(endpoint URL, model, temperatures, caps, sandbox limits, template
directory) comes from an optional JSON config file with defaults below.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

from .orchestrator import EngineConfig
from .prompts import PromptLibrary, default_library
from .sandbox import ExecutionLimits

ENV_API_KEY = "SOLILOQUY_API_KEY"
ENV_STUDENT_TOKEN = "SOLILOQUY_STUDENT_TOKEN"
ENV_INSPECTOR_TOKEN = "SOLILOQUY_INSPECTOR_TOKEN"

DEFAULT_STUDENT_TOKEN = "student-token"
DEFAULT_INSPECTOR_TOKEN = "inspector-token"


@dataclass(frozen=True)
class AppConfig:
    """Every file-configurable knob, with its default."""

    base_url: str = "https://api.openai.com/v1"
    model_id: str = "gpt-4"
    student_temperature: float = 0.7
    tutor_temperature: float = 0.2
    max_tokens: int = 1024
    max_repairs: int = 3
    max_visible_turns: int = 40
    sandbox_timeout_s: float = 5.0
    sandbox_memory_bytes: int = 256 * 1024 * 1024
    template_directory: str | None = None

    def engine_config(self) -> EngineConfig:
        return EngineConfig(
            model_id=self.model_id,
            student_temperature=self.student_temperature,
            tutor_temperature=self.tutor_temperature,
            max_tokens=self.max_tokens,
            max_repairs=self.max_repairs,
            max_visible_turns=self.max_visible_turns,
        )

    def execution_limits(self) -> ExecutionLimits:
        return ExecutionLimits(
            timeout_s=self.sandbox_timeout_s, memory_bytes=self.sandbox_memory_bytes
        )

    def prompt_library(self) -> PromptLibrary:
        if self.template_directory is None:
            return default_library()
        return PromptLibrary(self.template_directory)


def load_config(path: Path | str | None = None) -> AppConfig:
    """Read a JSON config file; absent path or file means pure defaults."""
    if path is None:
        return AppConfig()
    path = Path(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValueError("config file must hold a JSON object")
    known = {f.name for f in fields(AppConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    return AppConfig(**raw)


def api_key() -> str | None:
    return os.environ.get(ENV_API_KEY)


def student_token() -> str:
    return os.environ.get(ENV_STUDENT_TOKEN, DEFAULT_STUDENT_TOKEN)


def inspector_token() -> str:
    return os.environ.get(ENV_INSPECTOR_TOKEN, DEFAULT_INSPECTOR_TOKEN)
