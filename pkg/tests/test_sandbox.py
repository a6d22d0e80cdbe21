"""Sandboxed execution: the shim protocol, isolation, limits, and formatting."""

from __future__ import annotations

import json
import subprocess
import sys
import time

import pytest

from soliloquy.protocol import CodeArtifact
from soliloquy.sandbox import (
    STATUS_COMPILE_ERROR,
    STATUS_MISSING_VARIABLE,
    STATUS_OK,
    STATUS_RUNTIME_ERROR,
    STATUS_TIMEOUT,
    ExecutionLimits,
    ExecutionResult,
    Sandbox,
    check_compiles,
    format_python_output,
    format_value,
)
from soliloquy.sandbox import _shim_path


def run_shim(code, result_variables):
    """Talk to the shim directly over its documented stdin/stdout protocol."""
    request = json.dumps({"code": code, "result_variables": result_variables})
    proc = subprocess.run(
        [sys.executable, "-I", _shim_path()],
        input=request.encode("utf-8"),
        capture_output=True,
        timeout=30,
    )
    return json.loads(proc.stdout.decode("utf-8"))


def execute(code, result_variables, timeout_s=10.0):
    sandbox = Sandbox(ExecutionLimits(timeout_s=timeout_s))
    return sandbox.execute(CodeArtifact(code=code, result_variables=tuple(result_variables)))


# --- shim protocol, exercised without the host wrapper ---------------------


def test_shim_ok_with_math():
    response = run_shim("import math\nv = 9.8 * 2\nok = math.isclose(v, 19.6)", ["v", "ok"])
    assert response["status"] == "ok"
    assert response["values"] == {"v": 19.6, "ok": True}


def test_shim_compile_error():
    response = run_shim("v = = 2", ["v"])
    assert response["status"] == "compile_error"
    assert response["values"] == {}
    assert response["stderr"]


def test_shim_runtime_error_carries_traceback():
    response = run_shim("v = 1 / 0", ["v"])
    assert response["status"] == "runtime_error"
    assert "ZeroDivisionError" in response["stderr"]


def test_shim_missing_variable():
    response = run_shim("v = 1", ["v", "w"])
    assert response["status"] == "missing_variable"
    assert "'w'" in response["stderr"]


def test_shim_denies_listed_imports():
    for module in ("os", "subprocess", "socket", "importlib"):
        response = run_shim(f"import {module}\nv = 1", ["v"])
        assert response["status"] == "runtime_error", module
        assert "denied" in response["stderr"], module


def test_shim_denies_from_imports_and_submodules():
    response = run_shim("from os import path\nv = 1", ["v"])
    assert response["status"] == "runtime_error"
    response = run_shim("import os.path\nv = 1", ["v"])
    assert response["status"] == "runtime_error"


def test_shim_allows_math_family():
    code = (
        "import math, random, statistics, fractions, decimal\n"
        "random.seed(1)\n"
        "v = statistics.mean([1, 2, 3])\n"
    )
    response = run_shim(code, ["v"])
    assert response["status"] == "ok"
    assert response["values"]["v"] == 2


def test_shim_removes_dangerous_builtins():
    for name in ("open", "input", "exit", "quit", "breakpoint", "help"):
        response = run_shim(f"v = {name}", ["v"])
        assert response["status"] == "runtime_error", name
        assert "NameError" in response["stderr"], name


def test_shim_captures_stray_stdout_without_breaking_protocol():
    # The shim's stdout must stay a single JSON document even if the code
    # writes to stdout through an un-denied channel.
    response = run_shim("import sys as _s\nv = 1", ["v"])
    assert response["status"] == "runtime_error"  # sys import is denied


def test_shim_coerces_exotic_values_to_repr():
    response = run_shim("v = {1, 2}", ["v"])
    assert response["status"] == "ok"
    assert response["values"]["v"] == "{1, 2}"


def test_shim_none_and_string_values_pass_through():
    response = run_shim("a = None\nb = 'text'", ["a", "b"])
    assert response["values"] == {"a": None, "b": "text"}


# --- host wrapper ----------------------------------------------------------


def test_execution_limits_validation():
    with pytest.raises(ValueError):
        ExecutionLimits(timeout_s=0)
    with pytest.raises(ValueError):
        ExecutionLimits(memory_bytes=0)


def test_execution_result_values_only_when_ok():
    with pytest.raises(ValueError):
        ExecutionResult(status=STATUS_TIMEOUT, values={"v": 1})
    with pytest.raises(ValueError):
        ExecutionResult(status="bogus")


def test_execute_ok_orders_values_by_result_variables():
    result = execute("b = 2\na = 1", ["a", "b"])
    assert result.status == STATUS_OK
    assert list(result.values) == ["a", "b"]
    assert result.values == {"a": 1, "b": 2}


def test_execute_statuses():
    assert execute("v = (", ["v"]).status == STATUS_COMPILE_ERROR
    assert execute("v = 1 / 0", ["v"]).status == STATUS_RUNTIME_ERROR
    assert execute("x = 1", ["v"]).status == STATUS_MISSING_VARIABLE


def test_execute_timeout_is_bounded():
    started = time.monotonic()
    result = execute("while True:\n    pass", ["v"], timeout_s=2.0)
    elapsed = time.monotonic() - started
    assert result.status == STATUS_TIMEOUT
    assert elapsed < 3.0
    assert result.values == {}


def test_execute_isolation_between_runs():
    first = execute("leak = 41\nv = 1", ["v"])
    assert first.status == STATUS_OK
    second = execute("v = leak + 1", ["v"])
    assert second.status == STATUS_RUNTIME_ERROR
    assert "NameError" in second.stderr


def test_execute_stderr_is_truncated():
    result = execute("raise ValueError('x' * 100000)", ["v"])
    assert result.status == STATUS_RUNTIME_ERROR
    assert len(result.stderr) <= 2048


def test_execute_survives_code_that_kills_itself():
    # A hard interpreter death mid-run must surface as runtime_error, not a
    # host exception.
    result = execute(
        "import math\n[].extend_does_not_exist()", ["v"]
    )
    assert result.status == STATUS_RUNTIME_ERROR


# --- formatting ------------------------------------------------------------


def test_format_value_shortest_float_form():
    assert format_value(19.6) == "19.6"
    assert format_value(True) == "True"
    assert format_value("m/s") == "'m/s'"


def test_format_python_output_ok():
    result = execute("v = 9.8 * 2\nis_correct = True", ["v", "is_correct"])
    assert format_python_output(result) == "v = 19.6\nis_correct = True"


def test_format_python_output_failure():
    result = ExecutionResult(status=STATUS_TIMEOUT, stderr="execution timed out")
    assert format_python_output(result) == "execution failed: timeout"


def test_check_compiles():
    assert check_compiles("v = 9.8 * 2") is True
    assert check_compiles("v = = 2") is False
    assert check_compiles("def f(:\n    pass") is False
    assert check_compiles("") is True
