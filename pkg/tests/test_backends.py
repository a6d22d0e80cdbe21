"""Backend contract tests: message validation, replay discipline, HTTP retries."""

from __future__ import annotations

import hashlib
import json

import httpx
import pytest

from soliloquy.backends import (
    ChatMessage,
    CompletionParams,
    FingerprintMismatch,
    FixtureExhausted,
    FixtureRecord,
    HttpChatBackend,
    RecordingBackend,
    ScriptedBackend,
    TransportError,
    dump_fixture,
    fingerprint,
    load_fixture,
)

MESSAGES = [
    ChatMessage(role="system", content="You are a helper."),
    ChatMessage(role="user", content="State 9.8 * 2."),
]
PARAMS = CompletionParams(model="gpt-4", temperature=0.2, max_tokens=64)


def test_chat_message_validation():
    with pytest.raises(ValueError):
        ChatMessage(role="narrator", content="x")
    with pytest.raises(ValueError):
        ChatMessage(role="user", content="")
    with pytest.raises(ValueError):
        ChatMessage(role="assistant", content="")
    # System prompts may legitimately be empty.
    assert ChatMessage(role="system", content="").content == ""


def test_completion_params_bounds():
    with pytest.raises(ValueError):
        CompletionParams(temperature=-0.1)
    with pytest.raises(ValueError):
        CompletionParams(temperature=2.1)
    assert CompletionParams(temperature=0.0).temperature == 0.0
    assert CompletionParams(temperature=2.0).temperature == 2.0


def test_fingerprint_matches_independent_recomputation():
    canonical = json.dumps(
        [
            {"role": "system", "content": "You are a helper."},
            {"role": "user", "content": "State 9.8 * 2."},
        ],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    expected = hashlib.sha256(canonical.encode("utf-8")).hexdigest()
    assert fingerprint(MESSAGES) == expected


def test_fingerprint_sensitivity():
    base = fingerprint(MESSAGES)
    assert fingerprint(MESSAGES) == base
    swapped = [MESSAGES[0], ChatMessage(role="user", content="State 9.8 * 3.")]
    assert fingerprint(swapped) != base
    relabeled = [MESSAGES[0], ChatMessage(role="assistant", content="State 9.8 * 2.")]
    assert fingerprint(relabeled) != base


# --- scripted --------------------------------------------------------------


def test_scripted_backend_serves_in_order():
    backend = ScriptedBackend(["first", "second"])
    assert backend.remaining == 2
    assert backend.complete(MESSAGES, PARAMS) == "first"
    assert backend.complete(MESSAGES, PARAMS) == "second"
    assert backend.remaining == 0


def test_scripted_backend_exhaustion():
    backend = ScriptedBackend(["only"])
    backend.complete(MESSAGES, PARAMS)
    with pytest.raises(FixtureExhausted):
        backend.complete(MESSAGES, PARAMS)


def test_scripted_backend_fingerprint_check():
    record = FixtureRecord(reply="ok", fingerprint=fingerprint(MESSAGES))
    backend = ScriptedBackend([record])
    assert backend.complete(MESSAGES, PARAMS) == "ok"

    backend = ScriptedBackend([FixtureRecord(reply="ok", fingerprint="0" * 64)])
    with pytest.raises(FingerprintMismatch):
        backend.complete(MESSAGES, PARAMS)


def test_scripted_backend_unfingerprinted_records_skip_check():
    backend = ScriptedBackend([FixtureRecord(reply="ok")])
    assert backend.complete(MESSAGES, PARAMS) == "ok"


def test_scripted_backend_rejects_empty_messages():
    with pytest.raises(ValueError):
        ScriptedBackend(["x"]).complete([], PARAMS)


# --- recording and fixture files -------------------------------------------


def test_recording_backend_round_trip(tmp_path):
    path = tmp_path / "fixture.jsonl"
    recorder = RecordingBackend(ScriptedBackend(["alpha", "beta"]), path)
    assert recorder.kind == "scripted"
    other = [ChatMessage(role="user", content="different request")]
    assert recorder.complete(MESSAGES, PARAMS) == "alpha"
    assert recorder.complete(other, PARAMS) == "beta"

    replay = load_fixture(path)
    assert replay.remaining == 2
    assert replay.complete(MESSAGES, PARAMS) == "alpha"
    # Replaying the second exchange with the wrong request must fail loudly.
    with pytest.raises(FingerprintMismatch):
        replay.complete(MESSAGES, PARAMS)


def test_dump_fixture_and_load(tmp_path):
    path = tmp_path / "fixture.jsonl"
    dump_fixture(["plain reply", FixtureRecord(reply="pinned", fingerprint="f" * 64)], path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert json.loads(lines[0]) == {"fingerprint": None, "reply": "plain reply"}
    backend = load_fixture(path)
    assert backend.complete(MESSAGES, PARAMS) == "plain reply"
    with pytest.raises(FingerprintMismatch):
        backend.complete(MESSAGES, PARAMS)


def test_load_fixture_skips_blank_lines(tmp_path):
    path = tmp_path / "fixture.jsonl"
    path.write_text('{"reply": "a"}\n\n{"reply": "b"}\n', encoding="utf-8")
    assert load_fixture(path).remaining == 2


# --- http ------------------------------------------------------------------


def completion_payload(content="the reply"):
    return {"choices": [{"message": {"content": content}}]}


def make_backend(handler, **kwargs):
    kwargs.setdefault("sleep", lambda _: None)
    return HttpChatBackend(
        "https://example.test/v1",
        api_key="secret-key",
        transport=httpx.MockTransport(handler),
        **kwargs,
    )


def test_http_backend_posts_expected_body():
    seen = {}

    def handler(request):
        seen["url"] = str(request.url)
        seen["auth"] = request.headers.get("authorization")
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, json=completion_payload())

    backend = make_backend(handler)
    params = CompletionParams(model="gpt-4", temperature=0.2, max_tokens=64, seed=11)
    assert backend.complete(MESSAGES, params) == "the reply"
    assert seen["url"] == "https://example.test/v1/chat/completions"
    assert seen["auth"] == "Bearer secret-key"
    assert seen["body"]["model"] == "gpt-4"
    assert seen["body"]["temperature"] == 0.2
    assert seen["body"]["max_tokens"] == 64
    assert seen["body"]["seed"] == 11
    assert seen["body"]["messages"][1] == {"role": "user", "content": "State 9.8 * 2."}
    backend.close()


def test_http_backend_omits_absent_seed():
    bodies = []

    def handler(request):
        bodies.append(json.loads(request.content))
        return httpx.Response(200, json=completion_payload())

    backend = make_backend(handler)
    backend.complete(MESSAGES, CompletionParams(seed=None))
    assert "seed" not in bodies[0]
    backend.close()


def test_http_backend_retries_transient_failures():
    calls = {"n": 0}
    waits = []

    def handler(request):
        calls["n"] += 1
        if calls["n"] == 1:
            return httpx.Response(429)
        if calls["n"] == 2:
            return httpx.Response(503)
        return httpx.Response(200, json=completion_payload("recovered"))

    backend = make_backend(handler, sleep=waits.append)
    assert backend.complete(MESSAGES, PARAMS) == "recovered"
    assert calls["n"] == 3
    assert waits == [1.0, 2.0]
    backend.close()


def test_http_backend_gives_up_after_retries():
    def handler(request):
        return httpx.Response(500)

    backend = make_backend(handler)
    with pytest.raises(TransportError, match="500"):
        backend.complete(MESSAGES, PARAMS)
    backend.close()


def test_http_backend_does_not_retry_client_errors():
    calls = {"n": 0}

    def handler(request):
        calls["n"] += 1
        return httpx.Response(401, text="bad key")

    backend = make_backend(handler)
    with pytest.raises(TransportError, match="401"):
        backend.complete(MESSAGES, PARAMS)
    assert calls["n"] == 1
    backend.close()


def test_http_backend_retries_transport_errors():
    calls = {"n": 0}

    def handler(request):
        calls["n"] += 1
        if calls["n"] < 3:
            raise httpx.ConnectError("refused")
        return httpx.Response(200, json=completion_payload())

    backend = make_backend(handler)
    assert backend.complete(MESSAGES, PARAMS) == "the reply"
    backend.close()


def test_http_backend_malformed_payloads():
    def handler(request):
        return httpx.Response(200, json={"choices": []})

    backend = make_backend(handler)
    with pytest.raises(TransportError, match="malformed"):
        backend.complete(MESSAGES, PARAMS)
    backend.close()

    def handler_non_string(request):
        return httpx.Response(200, json={"choices": [{"message": {"content": 5}}]})

    backend = make_backend(handler_non_string)
    with pytest.raises(TransportError, match="not a string"):
        backend.complete(MESSAGES, PARAMS)
    backend.close()


def test_http_backend_requires_messages():
    backend = make_backend(lambda request: httpx.Response(200, json=completion_payload()))
    with pytest.raises(ValueError):
        backend.complete([], PARAMS)
    backend.close()
