"""Chat-completion backends: a real HTTP client and a deterministic scripted replay.

The engine only ever sees the ``complete(messages, params) -> str`` surface,
so recorded fixtures can stand in for a live endpoint byte-for-byte. Replay
fixture files are JSON Lines, one ``{"fingerprint", "reply"}`` record per
exchange, in call order.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import httpx

ROLE_SYSTEM = "system"
ROLE_USER = "user"
ROLE_ASSISTANT = "assistant"
_ROLES = (ROLE_SYSTEM, ROLE_USER, ROLE_ASSISTANT)


class TransportError(Exception):
    """The endpoint could not be reached or kept failing after retries."""


class FixtureExhausted(Exception):
    """The scripted backend ran out of recorded replies."""


class FingerprintMismatch(Exception):
    """A replayed request did not match the recorded request it replaces."""


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in _ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.role in (ROLE_USER, ROLE_ASSISTANT) and not self.content:
            raise ValueError(f"{self.role} message content must be non-empty")


@dataclass(frozen=True)
class CompletionParams:
    model: str = "gpt-4"
    temperature: float = 0.7
    max_tokens: int = 1024
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must lie in [0, 2], got {self.temperature}")


def fingerprint(messages: Sequence[ChatMessage]) -> str:
    """Stable SHA-256 over the role-tagged message array."""
    canonical = json.dumps(
        [{"role": m.role, "content": m.content} for m in messages],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ChatBackend(Protocol):
    kind: str

    def complete(self, messages: Sequence[ChatMessage], params: CompletionParams) -> str:
        ...


class HttpChatBackend:
    """Client for a bearer-token chat-completion endpoint.

    Transient transport failures, 429s, and 5xx responses are retried with
    exponential backoff (3 attempts, 1s/2s/4s). Concurrency is capped by a
    semaphore so batch generation cannot stampede the endpoint.
    """

    kind = "http"

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        *,
        max_in_flight: int = 4,
        timeout: float = 120.0,
        retry_waits: Sequence[float] = (1.0, 2.0, 4.0),
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        headers = {}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"), headers=headers, timeout=timeout, transport=transport
        )
        self._semaphore = threading.BoundedSemaphore(max_in_flight)
        self._retry_waits = tuple(retry_waits)
        self._sleep = sleep

    def complete(self, messages: Sequence[ChatMessage], params: CompletionParams) -> str:
        if not messages:
            raise ValueError("messages must be non-empty")
        body = {
            "model": params.model,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        if params.seed is not None:
            body["seed"] = params.seed

        last_error: str = "no attempt made"
        with self._semaphore:
            for attempt in range(len(self._retry_waits) + 1):
                if attempt:
                    self._sleep(self._retry_waits[attempt - 1])
                try:
                    response = self._client.post("/chat/completions", json=body)
                except httpx.TransportError as exc:
                    last_error = f"transport failure: {exc}"
                    continue
                if response.status_code == 429 or response.status_code >= 500:
                    last_error = f"endpoint returned {response.status_code}"
                    continue
                if response.status_code != 200:
                    raise TransportError(
                        f"endpoint returned {response.status_code}: {response.text[:500]}"
                    )
                return self._extract_content(response)
        raise TransportError(f"retries exhausted; last error: {last_error}")

    @staticmethod
    def _extract_content(response: httpx.Response) -> str:
        try:
            payload = response.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion response: {exc}") from exc
        if not isinstance(content, str):
            raise TransportError("completion content is not a string")
        return content

    def close(self):
        self._client.close()


@dataclass(frozen=True)
class FixtureRecord:
    """One recorded exchange: optional request fingerprint plus the reply."""

    reply: str
    fingerprint: str | None = None


class ScriptedBackend:
    """Serves pre-recorded replies strictly in order.

    Fully deterministic: the same fixture and call sequence always yield the
    same outputs. Calls must be externally serialized; one fixture per session.
    """

    kind = "scripted"

    def __init__(self, records: Iterable[FixtureRecord | str]):
        self._records = [
            record if isinstance(record, FixtureRecord) else FixtureRecord(reply=record)
            for record in records
        ]
        self._cursor = 0

    def complete(self, messages: Sequence[ChatMessage], params: CompletionParams) -> str:
        if not messages:
            raise ValueError("messages must be non-empty")
        if self._cursor >= len(self._records):
            raise FixtureExhausted(f"fixture exhausted after {self._cursor} replies")
        record = self._records[self._cursor]
        if record.fingerprint is not None:
            actual = fingerprint(messages)
            if actual != record.fingerprint:
                raise FingerprintMismatch(
                    f"request {self._cursor} does not match the recorded request "
                    f"(expected {record.fingerprint[:12]}..., got {actual[:12]}...)"
                )
        self._cursor += 1
        return record.reply

    @property
    def remaining(self) -> int:
        return len(self._records) - self._cursor


class RecordingBackend:
    """Wraps another backend and journals every exchange to a fixture file."""

    def __init__(self, inner: ChatBackend, path: Path | str):
        self._inner = inner
        self._path = Path(path)
        self._lock = threading.Lock()
        self.kind = inner.kind

    def complete(self, messages: Sequence[ChatMessage], params: CompletionParams) -> str:
        reply = self._inner.complete(messages, params)
        record = {"fingerprint": fingerprint(messages), "reply": reply}
        line = json.dumps(record, ensure_ascii=False)
        with self._lock, self._path.open("a", encoding="utf-8") as handle:
            handle.write(line + "\n")
        return reply


def load_fixture(path: Path | str) -> ScriptedBackend:
    """Load a JSON Lines fixture file into a scripted backend."""
    records = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            payload = json.loads(line)
            records.append(
                FixtureRecord(reply=payload["reply"], fingerprint=payload.get("fingerprint"))
            )
    return ScriptedBackend(records)


def dump_fixture(replies: Iterable[FixtureRecord | str], path: Path | str) -> None:
    """Write replies as a fixture file; plain strings get no fingerprint."""
    with Path(path).open("w", encoding="utf-8") as handle:
        for record in replies:
            if isinstance(record, str):
                record = FixtureRecord(reply=record)
            payload = {"fingerprint": record.fingerprint, "reply": record.reply}
            handle.write(json.dumps(payload, ensure_ascii=False) + "\n")
