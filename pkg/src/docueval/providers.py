"""Pluggable model providers.

A provider turns a :class:`PromptEnvelope` into raw text. Two are built in:

* ``stub`` — fully deterministic; output is derived from a hash of the
  prompt and a seed, and always cites the first subject segment shown in the
  prompt. Every test and reproducibility check runs on this.
* ``http`` — a generic chat-completions adapter for OpenAI-style endpoints;
  the credential comes from the ``DOCUEVAL_PROVIDER_TOKEN`` environment
  variable.

Providers must be safe for concurrent ``complete`` calls.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field

import httpx

from .canonical import sha256_hex
from .errors import ProviderError, UnknownProvider

PROVIDER_TOKEN_ENV = "DOCUEVAL_PROVIDER_TOKEN"

# Field type tags a response schema may use. The stub generates a valid value
# for each tag; parse_model_output validates them.
FIELD_TEXT = "text"
FIELD_TEXT_LIST = "text_list"
FIELD_EVIDENCE_LIST = "evidence_list"
FIELD_SCORE = "score"
FIELD_QUERIES = "queries"
FIELD_CRITERIA_LIST = "criteria_list"

_SEG_MARKER_RE = re.compile(r"\[seg:([^\]\n]+)\]\n(.*?)(?=\n\[seg:|\n### |\Z)", re.DOTALL)


@dataclass(frozen=True)
class ResponseSchema:
    """Machine-readable description of the strict JSON object a call must return."""

    name: str
    fields: dict[str, str]

    def instruction(self) -> str:
        lines = ["Respond with exactly one JSON object and nothing else.",
                 "Required keys:"]
        for key, kind in self.fields.items():
            if kind == FIELD_SCORE:
                lines.append(f'- "{key}": integer score')
            elif kind == FIELD_TEXT_LIST:
                lines.append(f'- "{key}": array of strings')
            elif kind == FIELD_EVIDENCE_LIST:
                lines.append(f'- "{key}": array of {{"segment_id": str, "quote": str}} '
                             "citing verbatim excerpts of the provided segments")
            elif kind == FIELD_QUERIES:
                lines.append(f'- "{key}": array of 1-3 short search query strings')
            elif kind == FIELD_CRITERIA_LIST:
                lines.append(f'- "{key}": array of {{"name": str, "description": str, '
                             '"weight": number}}')
            else:
                lines.append(f'- "{key}": string')
        return "\n".join(lines)


@dataclass(frozen=True)
class PromptEnvelope:
    system_text: str
    user_text: str
    schema: ResponseSchema
    score_scale: tuple[int, int] | None = None
    two_call: bool = False
    metadata: dict = field(default_factory=dict)

    def render_messages(self) -> list[dict]:
        user = self.user_text + "\n\n" + self.schema.instruction()
        return [
            {"role": "system", "content": self.system_text},
            {"role": "user", "content": user},
        ]


class Provider:
    """Provider contract: ``complete(envelope) -> raw text``."""

    name = "base"

    def complete(self, envelope: PromptEnvelope) -> str:
        raise NotImplementedError


def first_cited_segment(user_text: str) -> tuple[str, str] | None:
    """First ``[seg:<id>]`` marker in a prompt and the text that follows it."""
    m = _SEG_MARKER_RE.search(user_text)
    if not m:
        return None
    return m.group(1), m.group(2)


class StubProvider(Provider):
    """Schema-valid deterministic responses derived from hash(prompt, seed)."""

    name = "stub"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def _digest(self, envelope: PromptEnvelope) -> str:
        material = "\x00".join(
            [envelope.system_text, envelope.user_text, envelope.schema.name, str(self.seed)])
        return sha256_hex(material)

    def complete(self, envelope: PromptEnvelope) -> str:
        h = self._digest(envelope)
        seg = first_cited_segment(envelope.user_text)
        payload: dict = {}
        for key, kind in envelope.schema.fields.items():
            token = sha256_hex(h + key)[:8]
            if kind == FIELD_SCORE:
                lo, hi = envelope.score_scale or (1, 5)
                payload[key] = lo + int(h, 16) % (hi - lo + 1)
            elif kind == FIELD_TEXT_LIST:
                payload[key] = [f"{key} {i}: deterministic point {token}" for i in (1, 2, 3)]
            elif kind == FIELD_QUERIES:
                payload[key] = [f"query {token} focus", f"query {token} context"]
            elif kind == FIELD_CRITERIA_LIST:
                payload[key] = [
                    {"name": f"criterion-{token}-{i}",
                     "description": f"Deterministic extracted criterion {i} ({token}).",
                     "weight": 1}
                    for i in (1, 2, 3)
                ]
            elif kind == FIELD_EVIDENCE_LIST:
                payload[key] = self._evidence(seg)
            else:
                payload[key] = f"Deterministic {key} ({token}) grounded in the cited excerpt."
        return json.dumps(payload, sort_keys=True)

    @staticmethod
    def _evidence(seg: tuple[str, str] | None) -> list[dict]:
        if seg is None:
            return []
        sid, text = seg
        words = text.split()
        if not words:
            return []
        quote = " ".join(words[:10])
        return [{"segment_id": sid, "quote": quote,
                 "claim": f"The source states: {quote}"}]


class HttpChatProvider(Provider):
    """Generic chat-completions adapter (OpenAI-compatible wire format)."""

    name = "http"

    def __init__(self, base_url: str, model: str, api_key: str | None = None,
                 temperature: float = 0.0, timeout: float = 120.0,
                 transport: httpx.BaseTransport | None = None):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(PROVIDER_TOKEN_ENV)
        self.temperature = temperature
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def complete(self, envelope: PromptEnvelope) -> str:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": envelope.render_messages(),
        }
        try:
            response = self._client.post(
                f"{self.base_url}/chat/completions", json=body, headers=headers)
            response.raise_for_status()
            data = response.json()
            return data["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"http provider call failed: {exc}") from exc


def build_provider(spec: dict | None) -> Provider:
    """Instantiate a provider from a ``{"name": ..., "params": {...}}`` spec."""
    if spec is None:
        spec = {"name": "stub", "params": {}}
    name = spec.get("name", "stub")
    params = dict(spec.get("params") or {})
    if name == "stub":
        return StubProvider(seed=int(params.get("seed", 0)))
    if name == "http":
        return HttpChatProvider(
            base_url=params["base_url"],
            model=params.get("model", "default"),
            api_key=params.get("api_key"),
            temperature=float(params.get("temperature", 0.0)),
        )
    raise UnknownProvider(f"unknown provider {name!r}")
