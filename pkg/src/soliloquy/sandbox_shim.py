"""Single-shot interpreter-side executor for sandboxed calculation code.

Protocol: stdin carries one JSON document ``{"code", "result_variables"}``;
stdout carries exactly one JSON document ``{"status", "values", "stderr"}``,
whatever the submitted code does. Run as ``python -I sandbox_shim.py`` by the
host, which also applies the OS-level time and memory limits.

This file is deliberately self-contained (standard library only, no package
imports) so the host can talk to it purely through the documented protocol.
"""

import contextlib
import io
import json
import sys
import traceback

# Warm the permitted math-family modules so their transitive imports (random
# pulls in os, for example) are resolved before the import guard below can
# block them.
import bisect        # noqa: F401
import cmath         # noqa: F401
import collections   # noqa: F401
import decimal       # noqa: F401
import fractions     # noqa: F401
import functools     # noqa: F401
import itertools     # noqa: F401
import math          # noqa: F401
import numbers       # noqa: F401
import operator      # noqa: F401
import random        # noqa: F401
import statistics    # noqa: F401

STATUS_OK = "ok"
STATUS_COMPILE_ERROR = "compile_error"
STATUS_RUNTIME_ERROR = "runtime_error"
STATUS_MISSING_VARIABLE = "missing_variable"

STDERR_LIMIT = 2048

# Filesystem, network, and process control have no business in calculation
# snippets; neither do escape hatches around this guard.
DENIED_MODULES = frozenset(
    {
        "os", "sys", "io", "subprocess", "shutil", "pathlib", "tempfile", "glob",
        "fileinput", "socket", "ssl", "selectors", "socketserver", "http", "urllib",
        "ftplib", "smtplib", "poplib", "imaplib", "telnetlib", "requests", "httpx",
        "multiprocessing", "threading", "concurrent", "asyncio", "signal", "resource",
        "fcntl", "pty", "tty", "termios", "ctypes", "importlib", "builtins", "pickle",
        "shelve", "dbm", "sqlite3", "webbrowser", "code", "codeop", "runpy", "atexit",
    }
)

REMOVED_BUILTINS = ("open", "input", "exit", "quit", "breakpoint", "help")


def _guarded_import(name, globals=None, locals=None, fromlist=(), level=0):
    top = name.partition(".")[0]
    if top in DENIED_MODULES:
        raise ImportError(f"import of {top!r} is denied in the calculation sandbox")
    return __import__(name, globals, locals, fromlist, level)


def _guarded_builtins():
    import builtins

    table = dict(vars(builtins))
    for name in REMOVED_BUILTINS:
        table.pop(name, None)
    table["__import__"] = _guarded_import
    return table


def _coerce_value(value):
    if isinstance(value, (bool, int, float, str)) or value is None:
        return value
    return repr(value)


def run_request(code, result_variables):
    """Compile, execute, and harvest; every failure becomes a status code."""
    try:
        compiled = compile(code, "<calculation>", "exec")
    except (SyntaxError, ValueError) as exc:
        return {
            "status": STATUS_COMPILE_ERROR,
            "values": {},
            "stderr": str(exc)[:STDERR_LIMIT],
        }

    namespace = {"__builtins__": _guarded_builtins()}
    capture = io.StringIO()
    error_text = ""
    old_stdin = sys.stdin
    sys.stdin = io.StringIO("")
    try:
        with contextlib.redirect_stdout(capture), contextlib.redirect_stderr(capture):
            try:
                exec(compiled, namespace)
            except BaseException:
                error_text = traceback.format_exc(limit=5)
    finally:
        sys.stdin = old_stdin

    captured = capture.getvalue()
    if error_text:
        stderr = (captured + error_text)[-STDERR_LIMIT:]
        return {"status": STATUS_RUNTIME_ERROR, "values": {}, "stderr": stderr}

    values = {}
    for name in result_variables:
        if name not in namespace:
            return {
                "status": STATUS_MISSING_VARIABLE,
                "values": {},
                "stderr": (f"result variable {name!r} was never assigned")[:STDERR_LIMIT],
            }
        values[name] = _coerce_value(namespace[name])
    return {"status": STATUS_OK, "values": values, "stderr": captured[-STDERR_LIMIT:]}


def main():
    out = sys.stdout
    try:
        request = json.loads(sys.stdin.read())
        response = run_request(request["code"], list(request["result_variables"]))
    except BaseException as exc:
        response = {
            "status": STATUS_RUNTIME_ERROR,
            "values": {},
            "stderr": f"shim failure: {exc!r}"[:STDERR_LIMIT],
        }
    try:
        json.dump(response, out)
    except (TypeError, ValueError) as exc:
        json.dump(
            {
                "status": STATUS_RUNTIME_ERROR,
                "values": {},
                "stderr": f"result not serializable: {exc}"[:STDERR_LIMIT],
            },
            out,
        )
    out.write("\n")
    out.flush()


if __name__ == "__main__":
    main()
