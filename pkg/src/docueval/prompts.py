"""Prompt assembly and strict output parsing for the four reasoning strategies.

Each (strategy, style) pair has a deterministic template and a strict JSON
response schema. ``after_scoring`` is a two-call protocol: call 1 commits to
the score alone, call 2 justifies it — the only way to make the generation
order verifiable. A single repair attempt is made on malformed output
(re-prompt with the parse error appended); the second failure is final.
"""

from __future__ import annotations

import json

from .errors import MalformedOutput, ScoreOutOfRange
from .providers import (
    FIELD_EVIDENCE_LIST,
    FIELD_SCORE,
    FIELD_TEXT,
    FIELD_TEXT_LIST,
    PromptEnvelope,
    Provider,
    ResponseSchema,
)

_SYSTEM_BASE = (
    "You are a document evaluator. Assess the subject document against one "
    "criterion, acting strictly in the configured reviewer role. Ground every "
    "statement in the provided segments and cite them verbatim.")

_STRATEGY_DIRECTIVES = {
    "before_scoring": "Develop a comprehensive rationale first; only then settle the verdict.",
    "after_scoring": "Commit to your verdict immediately, before any justification.",
    "chain_of_thought": "Reason step by step and record each step on the path to the verdict.",
    "deep_reasoning_planning": ("Formulate an explicit assessment plan, then carry out an "
                                "in-depth analysis following it."),
}


def response_schema(strategy: str, style: str, call: int = 1) -> ResponseSchema:
    """Strict response schema for a strategy/style/call combination."""
    verdict_field = "score" if style == "scored" else "assessment_text"
    verdict_kind = FIELD_SCORE if style == "scored" else FIELD_TEXT
    if strategy == "after_scoring":
        if call == 1:
            return ResponseSchema(name=f"after_scoring.{style}.call1",
                                  fields={verdict_field: verdict_kind})
        return ResponseSchema(name=f"after_scoring.{style}.call2",
                              fields={"justification": FIELD_TEXT,
                                      "evidence": FIELD_EVIDENCE_LIST})
    if strategy == "before_scoring":
        fields = {"rationale": FIELD_TEXT, "evidence": FIELD_EVIDENCE_LIST,
                  verdict_field: verdict_kind}
    elif strategy == "chain_of_thought":
        fields = {"steps": FIELD_TEXT_LIST, "evidence": FIELD_EVIDENCE_LIST,
                  verdict_field: verdict_kind}
    elif strategy == "deep_reasoning_planning":
        fields = {"plan": FIELD_TEXT_LIST, "analysis": FIELD_TEXT,
                  "evidence": FIELD_EVIDENCE_LIST, verdict_field: verdict_kind}
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return ResponseSchema(name=f"{strategy}.{style}", fields=fields)


def render_segment(segment_id: str, text: str) -> str:
    return f"[seg:{segment_id}]\n{text}"


def render_bundle(bundle) -> str:
    """Render a context bundle in the fixed order: criterion, role, subject,
    reference material, evaluation examples."""
    parts = [
        f"### CRITERION: {bundle.criterion.name}",
        bundle.criterion.description,
        f"### REVIEWER ROLE: {bundle.role.role_name}",
        bundle.role.role_statement,
        f"### SUBJECT DOCUMENT: {bundle.subject_title}",
    ]
    parts.extend(render_segment(s.segment_id, s.text) for s in bundle.subject_segments)
    parts.append("### REFERENCE MATERIAL")
    parts.extend(render_segment(s.segment_id, s.text) for _, s in bundle.reference)
    parts.append("### EVALUATION EXAMPLES")
    parts.extend(render_segment(s.segment_id, s.text) for _, s in bundle.examples)
    return "\n".join(parts)


def assemble_prompt(bundle, strategy: str, style: str,
                    score_scale: tuple[int, int]) -> PromptEnvelope:
    """Deterministic prompt for one criterion under a strategy and style.

    Qualitative prompts carry no numeric scale anywhere.
    """
    directive = _STRATEGY_DIRECTIVES[strategy]
    if style == "scored":
        lo, hi = score_scale
        style_line = f"Assign an integer score between {lo} and {hi}."
        scale: tuple[int, int] | None = score_scale
    else:
        style_line = "Provide a narrative assessment. Do not produce any numeric score."
        scale = None
    return PromptEnvelope(
        system_text=f"{_SYSTEM_BASE}\n{directive}\n{style_line}",
        user_text=render_bundle(bundle),
        schema=response_schema(strategy, style, call=1),
        score_scale=scale,
        two_call=strategy == "after_scoring",
        metadata={"strategy": strategy, "style": style,
                  "criterion_id": bundle.criterion.criterion_id},
    )


def build_second_call(envelope: PromptEnvelope, verdict) -> PromptEnvelope:
    """Call 2 of the after_scoring protocol: justify the already-committed verdict."""
    style = envelope.metadata["style"]
    if style == "scored":
        committed = f"You already committed to the score {verdict}."
    else:
        committed = f"You already committed to this assessment: {verdict}"
    return PromptEnvelope(
        system_text=envelope.system_text,
        user_text=(f"{envelope.user_text}\n\n{committed}\n"
                   "Now justify it with evidence cited from the segments above."),
        schema=response_schema("after_scoring", style, call=2),
        score_scale=envelope.score_scale,
        two_call=True,
        metadata={**envelope.metadata, "call": 2},
    )


def parse_model_output(raw: str, strategy: str, style: str,
                       score_scale: tuple[int, int], call: int = 1) -> dict:
    """Parse one raw completion against its strict schema.

    Returns the validated payload fields. Structural problems raise
    MalformedOutput; a parseable score outside the scale raises
    ScoreOutOfRange (never clamped).
    """
    schema = response_schema(strategy, style, call)
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedOutput(f"not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise MalformedOutput(f"expected a JSON object, got {type(payload).__name__}")

    parsed: dict = {}
    for key, kind in schema.fields.items():
        if key not in payload:
            raise MalformedOutput(f"missing required key {key!r}")
        value = payload[key]
        if kind == FIELD_SCORE:
            if isinstance(value, bool) or not isinstance(value, int):
                raise MalformedOutput(f"key {key!r} must be an integer")
            lo, hi = score_scale
            if not lo <= value <= hi:
                raise ScoreOutOfRange(f"score {value} outside scale ({lo}, {hi})")
            parsed[key] = value
        elif kind == FIELD_TEXT:
            if not isinstance(value, str):
                raise MalformedOutput(f"key {key!r} must be a string")
            parsed[key] = value
        elif kind == FIELD_TEXT_LIST:
            if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                raise MalformedOutput(f"key {key!r} must be an array of strings")
            parsed[key] = value
        elif kind == FIELD_EVIDENCE_LIST:
            parsed[key] = _parse_evidence(key, value)
        else:
            parsed[key] = value
    return parsed


def _parse_evidence(key: str, value) -> list[dict]:
    if not isinstance(value, list):
        raise MalformedOutput(f"key {key!r} must be an array")
    rows = []
    for row in value:
        if (not isinstance(row, dict)
                or not isinstance(row.get("segment_id"), str)
                or not isinstance(row.get("quote"), str)):
            raise MalformedOutput(
                f"key {key!r} entries must be objects with segment_id and quote strings")
        rows.append({"segment_id": row["segment_id"], "quote": row["quote"],
                     "claim": row.get("claim") if isinstance(row.get("claim"), str) else None})
    return rows


def complete_and_parse(provider: Provider, envelope: PromptEnvelope, strategy: str,
                       style: str, score_scale: tuple[int, int],
                       call: int = 1, transcript: list | None = None) -> dict:
    """Provider call with exactly one repair attempt on malformed output."""
    raw = provider.complete(envelope)
    _record(transcript, envelope, raw, call, repaired=False)
    try:
        return parse_model_output(raw, strategy, style, score_scale, call)
    except MalformedOutput as first_error:
        repair = PromptEnvelope(
            system_text=envelope.system_text,
            user_text=(f"{envelope.user_text}\n\nYour previous response could not be "
                       f"parsed: {first_error}. Respond again, strictly as specified."),
            schema=envelope.schema,
            score_scale=envelope.score_scale,
            two_call=envelope.two_call,
            metadata={**envelope.metadata, "repair": True},
        )
        raw = provider.complete(repair)
        _record(transcript, repair, raw, call, repaired=True)
        try:
            return parse_model_output(raw, strategy, style, score_scale, call)
        except MalformedOutput as second_error:
            raise MalformedOutput(
                f"output unparseable after one repair attempt: {second_error}"
            ) from second_error


def _record(transcript: list | None, envelope: PromptEnvelope, raw: str,
            call: int, repaired: bool) -> None:
    if transcript is None:
        return
    transcript.append({
        "call": call,
        "repaired": repaired,
        "schema": envelope.schema.name,
        "system_text": envelope.system_text,
        "user_text": envelope.user_text,
        "response": raw,
    })
