"""Provider registry, the HTTP chat adapter, and the converter plug-in point."""

from __future__ import annotations

import json

import httpx
import pytest

from docueval.errors import ProviderError, RunPending, UnknownProvider
from docueval.ingestion import CommandConverter
from docueval.oversight import SessionManager
from docueval.providers import (
    PROVIDER_TOKEN_ENV,
    HttpChatProvider,
    PromptEnvelope,
    ResponseSchema,
    StubProvider,
    build_provider,
)

from conftest import make_config

ENVELOPE = PromptEnvelope(
    system_text="system", user_text="user",
    schema=ResponseSchema(name="t", fields={"rationale": "text"}))


class TestBuildProvider:
    def test_default_is_stub(self):
        provider = build_provider(None)
        assert isinstance(provider, StubProvider)
        assert provider.seed == 0

    def test_stub_seed_from_params(self):
        provider = build_provider({"name": "stub", "params": {"seed": 42}})
        assert provider.seed == 42

    def test_http_provider_built(self):
        provider = build_provider({"name": "http",
                                   "params": {"base_url": "http://llm.local/v1",
                                              "model": "m1"}})
        assert isinstance(provider, HttpChatProvider)
        assert provider.model == "m1"

    def test_unknown_provider(self):
        with pytest.raises(UnknownProvider):
            build_provider({"name": "quantum"})


class TestHttpChatProvider:
    def _provider(self, handler, **kwargs):
        return HttpChatProvider(base_url="http://llm.local/v1", model="m1",
                                transport=httpx.MockTransport(handler), **kwargs)

    def test_sends_messages_and_returns_content(self):
        captured = {}

        def handler(request: httpx.Request) -> httpx.Response:
            captured["url"] = str(request.url)
            captured["body"] = json.loads(request.content)
            captured["auth"] = request.headers.get("authorization")
            return httpx.Response(200, json={
                "choices": [{"message": {"content": '{"rationale": "fine"}'}}]})

        provider = self._provider(handler, api_key="k123")
        raw = provider.complete(ENVELOPE)
        assert raw == '{"rationale": "fine"}'
        assert captured["url"] == "http://llm.local/v1/chat/completions"
        assert captured["auth"] == "Bearer k123"
        assert captured["body"]["model"] == "m1"
        roles = [m["role"] for m in captured["body"]["messages"]]
        assert roles == ["system", "user"]
        assert "Required keys" in captured["body"]["messages"][1]["content"]

    def test_token_from_environment(self, monkeypatch):
        monkeypatch.setenv(PROVIDER_TOKEN_ENV, "env-token")
        seen = {}

        def handler(request: httpx.Request) -> httpx.Response:
            seen["auth"] = request.headers.get("authorization")
            return httpx.Response(200, json={
                "choices": [{"message": {"content": "{}"}}]})

        self._provider(handler).complete(ENVELOPE)
        assert seen["auth"] == "Bearer env-token"

    def test_http_error_wrapped(self):
        def handler(request: httpx.Request) -> httpx.Response:
            return httpx.Response(500, text="boom")

        with pytest.raises(ProviderError):
            self._provider(handler).complete(ENVELOPE)

    def test_malformed_payload_wrapped(self):
        def handler(request: httpx.Request) -> httpx.Response:
            return httpx.Response(200, json={"unexpected": True})

        with pytest.raises(ProviderError):
            self._provider(handler).complete(ENVELOPE)


class TestCommandConverter:
    def test_external_command_output_ingested(self):
        converter = CommandConverter(["tr", "a-z", "A-Z"])
        assert converter.convert("notes.txt", b"# heading\nbody") == "# HEADING\nBODY"

    def test_failing_command_raises(self):
        converter = CommandConverter(["false"])
        import subprocess
        with pytest.raises(subprocess.CalledProcessError):
            converter.convert("x", b"data")


class TestRunPending:
    def test_reveal_before_run_finishes(self, corpus, evaluator):
        manager = SessionManager(corpus["store"])
        session = manager.open_session(corpus["subject"].doc_id,
                                       make_config(evaluator), execute_run=False)
        manager.submit_human_review(
            session.session_id,
            [{"criterion_id": c.criterion_id, "score": 3, "comments": ""}
             for c in evaluator.criteria])
        with pytest.raises(RunPending):
            manager.reveal_ai_results(session.session_id)
        manager.execute_pending_run(session.session_id)
        run, report = manager.reveal_ai_results(session.session_id)
        assert run.status == "completed"
