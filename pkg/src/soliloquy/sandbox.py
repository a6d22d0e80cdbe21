"""Host side of the calculation sandbox: subprocess isolation and limits.

Each execution spawns a fresh isolated interpreter running the shim
(``sandbox_shim.py``), talks to it over the documented stdin/stdout JSON
protocol, and enforces wall-clock and memory limits at the OS level. No
state survives between executions.
"""

from __future__ import annotations

import importlib.util
import json
import math
import os
import signal
import subprocess
import sys
from dataclasses import dataclass, field

try:
    import resource
except ImportError:  # pragma: no cover - non-POSIX
    resource = None  # type: ignore[assignment]

from .protocol import CodeArtifact

STATUS_OK = "ok"
STATUS_COMPILE_ERROR = "compile_error"
STATUS_RUNTIME_ERROR = "runtime_error"
STATUS_TIMEOUT = "timeout"
STATUS_MISSING_VARIABLE = "missing_variable"

_STATUSES = (
    STATUS_OK,
    STATUS_COMPILE_ERROR,
    STATUS_RUNTIME_ERROR,
    STATUS_TIMEOUT,
    STATUS_MISSING_VARIABLE,
)

_STDERR_LIMIT = 2048


@dataclass(frozen=True)
class ExecutionLimits:
    """Resource caps per execution; network access is always denied."""

    timeout_s: float = 5.0
    memory_bytes: int = 256 * 1024 * 1024

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ValueError("timeout must be positive")
        if self.memory_bytes <= 0:
            raise ValueError("memory limit must be positive")


@dataclass
class ExecutionResult:
    """Outcome of one sandboxed run; ``values`` is populated only on ok."""

    status: str
    values: dict[str, object] = field(default_factory=dict)
    stderr: str = ""

    def __post_init__(self):
        if self.status not in _STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if self.status != STATUS_OK and self.values:
            raise ValueError("values must be empty unless status is ok")


def _shim_path() -> str:
    spec = importlib.util.find_spec("soliloquy.sandbox_shim")
    if spec is None or spec.origin is None:
        raise RuntimeError("sandbox shim module not found")
    return spec.origin


class Sandbox:
    """Runs code artifacts in throwaway interpreter subprocesses."""

    def __init__(self, limits: ExecutionLimits | None = None, python: str | None = None):
        self.limits = limits or ExecutionLimits()
        self._python = python or sys.executable
        self._shim = _shim_path()

    def execute(self, artifact: CodeArtifact) -> ExecutionResult:
        """Run the artifact and capture its result variables.

        Never raises for anything the submitted code does; every failure mode
        is reported through ``status``.
        """
        request = json.dumps(
            {"code": artifact.code, "result_variables": list(artifact.result_variables)}
        )
        limits = self.limits

        def apply_rlimits():
            resource.setrlimit(
                resource.RLIMIT_AS, (limits.memory_bytes, limits.memory_bytes)
            )
            resource.setrlimit(resource.RLIMIT_FSIZE, (1 << 20, 1 << 20))
            cpu = math.ceil(limits.timeout_s) + 1
            resource.setrlimit(resource.RLIMIT_CPU, (cpu, cpu + 1))

        proc = subprocess.Popen(
            [self._python, "-I", self._shim],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            env={"PYTHONIOENCODING": "utf-8"},
            start_new_session=True,
            preexec_fn=apply_rlimits if resource is not None else None,
        )
        try:
            stdout, stderr_bytes = proc.communicate(
                request.encode("utf-8"), timeout=limits.timeout_s
            )
        except subprocess.TimeoutExpired:
            self._kill(proc)
            return ExecutionResult(status=STATUS_TIMEOUT, stderr="execution timed out")

        stderr_tail = stderr_bytes.decode("utf-8", errors="replace")[-_STDERR_LIMIT:]
        try:
            payload = json.loads(stdout.decode("utf-8"))
            status = payload["status"]
            values = payload["values"]
            shim_stderr = payload.get("stderr", "")
        except (ValueError, KeyError, TypeError):
            return ExecutionResult(
                status=STATUS_RUNTIME_ERROR,
                stderr=f"sandbox process failed (exit {proc.returncode}): {stderr_tail}"[
                    :_STDERR_LIMIT
                ],
            )
        if status not in _STATUSES or not isinstance(values, dict):
            return ExecutionResult(
                status=STATUS_RUNTIME_ERROR, stderr="sandbox returned an invalid response"
            )
        if status == STATUS_OK:
            missing = [
                name for name in artifact.result_variables if name not in values
            ]
            if missing:
                return ExecutionResult(
                    status=STATUS_RUNTIME_ERROR,
                    stderr=f"sandbox omitted result variables: {', '.join(missing)}",
                )
            ordered = {name: values[name] for name in artifact.result_variables}
            return ExecutionResult(status=STATUS_OK, values=ordered, stderr=shim_stderr)
        return ExecutionResult(status=status, stderr=shim_stderr)

    @staticmethod
    def _kill(proc: subprocess.Popen) -> None:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except (ProcessLookupError, PermissionError, OSError):
            proc.kill()
        proc.communicate()


def check_compiles(code: str) -> bool:
    """True iff the code parses and compiles; nothing is executed."""
    try:
        compile(code, "<artifact>", "exec")
    except (SyntaxError, ValueError):
        return False
    return True


def format_value(value: object) -> str:
    return repr(value)


def format_python_output(result: ExecutionResult) -> str:
    """Render an execution result for the tutor's received-python prompt.

    Successful runs become ``name = value`` lines in result-variable order,
    with floats in shortest round-trip form; failures become a one-line
    diagnostic the tutor can relay gracefully.
    """
    if result.status != STATUS_OK:
        return f"execution failed: {result.status}"
    return "\n".join(f"{name} = {format_value(value)}" for name, value in result.values.items())
