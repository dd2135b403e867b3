"""Layered, deterministic guardrails.

Four stages mirror the pipeline: ``upload`` (format/encoding/size),
``pre_prompt`` (PII and prompt-injection checks on outbound context),
``post_output`` (attribution verification of model claims) and ``storage``.
Detection is pattern-based and documented — every rule is testable and its
findings carry exact spans. A stage runs all of its rules (no
short-circuiting) so audit trails are complete.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import UnknownSegment
from .ingestion import normalize_ws

STAGES = ("upload", "pre_prompt", "post_output", "storage")
SEVERITIES = ("info", "warn", "block")

DEFAULT_ALLOWED_EXTENSIONS = (".md", ".txt")
DEFAULT_MAX_UPLOAD_BYTES = 5 * 1024 * 1024

EMAIL_RE = re.compile(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}")
PHONE_RE = re.compile(r"(?<!\w)\+?\d(?:[\s().-]?\d){7,}(?!\w)")

# Deny-list phrases are matched on whitespace-normalized, lowercased text so
# line breaks inside a phrase do not hide it.
INJECTION_PHRASES = (
    "ignore previous instructions",
    "disregard the above",
    "you are now",
    "system prompt",
)
IMPERATIVE_ROLE_RE = re.compile(
    r"\b(?:act|pretend|behave|roleplay|respond|pose)\s+as\s+(?:a|an|the)?\s*"
    r"(?:system|assistant|administrator|admin|developer|ai|model|agent)\b")


@dataclass(frozen=True)
class GuardrailFinding:
    rule_id: str
    severity: str
    message: str
    location: str = ""

    def to_dict(self) -> dict:
        return {"rule_id": self.rule_id, "severity": self.severity,
                "message": self.message, "location": self.location}


@dataclass(frozen=True)
class GuardrailVerdict:
    stage: str
    passed: bool
    findings: tuple[GuardrailFinding, ...]

    @classmethod
    def from_findings(cls, stage: str, findings) -> "GuardrailVerdict":
        findings = tuple(findings)
        return cls(stage=stage, findings=findings,
                   passed=not any(f.severity == "block" for f in findings))

    def to_dict(self) -> dict:
        return {"stage": self.stage, "passed": self.passed,
                "findings": [f.to_dict() for f in self.findings]}


@dataclass(frozen=True)
class PiiFinding:
    kind: str
    char_span: tuple[int, int]
    matched_text: str


def validate_upload(filename: str, data: bytes,
                    allowed_extensions=DEFAULT_ALLOWED_EXTENSIONS,
                    max_bytes: int = DEFAULT_MAX_UPLOAD_BYTES) -> GuardrailVerdict:
    """Upload checks: extension, emptiness, size cap, UTF-8 decodability."""
    findings = []
    suffix = Path(filename).suffix.lower()
    if suffix not in allowed_extensions:
        findings.append(GuardrailFinding(
            "unsupported_extension", "block",
            f"extension {suffix or '(none)'} is not supported", filename))
    if len(data) == 0:
        findings.append(GuardrailFinding("empty_file", "block", "file is empty", filename))
    if len(data) > max_bytes:
        findings.append(GuardrailFinding(
            "file_too_large", "block",
            f"file is {len(data)} bytes, cap is {max_bytes}", filename))
    try:
        data.decode("utf-8")
    except UnicodeDecodeError as exc:
        findings.append(GuardrailFinding(
            "invalid_encoding", "block", f"not valid UTF-8: {exc}", filename))
    return GuardrailVerdict.from_findings("upload", findings)


def scan_pii(text: str, id_patterns: tuple[str, ...] = ()) -> list[PiiFinding]:
    """Documented PII patterns: email, phone (8+ digits), configurable id numbers."""
    findings: list[PiiFinding] = []
    email_spans: list[tuple[int, int]] = []
    for m in EMAIL_RE.finditer(text):
        email_spans.append(m.span())
        findings.append(PiiFinding("email", m.span(), m.group(0)))
    for m in PHONE_RE.finditer(text):
        lo, hi = m.span()
        if any(lo < e_hi and hi > e_lo for e_lo, e_hi in email_spans):
            continue
        if sum(ch.isdigit() for ch in m.group(0)) >= 8:
            findings.append(PiiFinding("phone", (lo, hi), m.group(0)))
    for pattern in id_patterns:
        for m in re.finditer(pattern, text):
            findings.append(PiiFinding("id_number", m.span(), m.group(0)))
    findings.sort(key=lambda f: f.char_span)
    return findings


def detect_prompt_injection(segment_text: str,
                            severity: str = "block") -> list[GuardrailFinding]:
    """Deny-list and imperative-plus-role scan over normalized text."""
    normalized = normalize_ws(segment_text).lower()
    findings = []
    for phrase in INJECTION_PHRASES:
        index = normalized.find(phrase)
        if index >= 0:
            findings.append(GuardrailFinding(
                "prompt_injection", severity,
                f"deny-list phrase {phrase!r}", f"normalized offset {index}"))
    m = IMPERATIVE_ROLE_RE.search(normalized)
    if m:
        findings.append(GuardrailFinding(
            "prompt_injection", severity,
            f"imperative role pattern {m.group(0)!r}", f"normalized offset {m.start()}"))
    return findings


def verify_attribution(assessment, store) -> GuardrailVerdict:
    """Check that every claimed quote really is in the segment it cites.

    Each evidence segment_id must resolve (else ``unresolved_evidence``) and
    each quote, whitespace-normalized, must be a substring of the cited
    segment's normalized text (else ``quote_mismatch``). A scored assessment
    with zero claims earns a ``no_evidence`` warning.
    """
    findings = []
    for claim_index, claim in enumerate(assessment.claims):
        for evidence_index, (segment_id, quote) in enumerate(claim.evidence):
            location = f"claim {claim_index} evidence {evidence_index}"
            try:
                segment = store.lookup_segment(segment_id)
            except UnknownSegment:
                findings.append(GuardrailFinding(
                    "unresolved_evidence", "block",
                    f"cited segment {segment_id!r} does not resolve", location))
                continue
            quote_n = normalize_ws(quote)
            if not quote_n or quote_n not in normalize_ws(segment.text):
                findings.append(GuardrailFinding(
                    "quote_mismatch", "block",
                    f"quote is not a substring of segment {segment_id!r}", location))
    if not assessment.claims and assessment.score is not None:
        findings.append(GuardrailFinding(
            "no_evidence", "warn", "scored assessment carries no evidence claims",
            assessment.criterion_id))
    return GuardrailVerdict.from_findings("post_output", findings)


@dataclass
class GuardrailRule:
    rule_id: str
    stage: str
    severity: str
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"rule_id": self.rule_id, "stage": self.stage,
                "severity": self.severity, "params": self.params}


DEFAULT_RULES = (
    GuardrailRule("unsupported_extension", "upload", "block",
                  {"allowed_extensions": list(DEFAULT_ALLOWED_EXTENSIONS)}),
    GuardrailRule("empty_file", "upload", "block"),
    GuardrailRule("file_too_large", "upload", "block",
                  {"max_bytes": DEFAULT_MAX_UPLOAD_BYTES}),
    GuardrailRule("invalid_encoding", "upload", "block"),
    GuardrailRule("pii_upload", "upload", "warn", {"id_patterns": []}),
    GuardrailRule("pii_prompt", "pre_prompt", "block", {"id_patterns": []}),
    GuardrailRule("prompt_injection", "pre_prompt", "block"),
    GuardrailRule("attribution", "post_output", "block"),
)


class GuardrailPipeline:
    """Stage-ordered rule sets; every rule in a stage runs so audits are complete."""

    def __init__(self, rules=DEFAULT_RULES):
        self.rules: list[GuardrailRule] = list(rules)

    @classmethod
    def from_config_file(cls, path: str | Path) -> "GuardrailPipeline":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls([GuardrailRule(**row) for row in data["rules"]])

    def to_config_dict(self) -> dict:
        return {"schema_version": 1, "rules": [r.to_dict() for r in self.rules]}

    def stage_rules(self, stage: str) -> list[GuardrailRule]:
        return [r for r in self.rules if r.stage == stage]

    def rule(self, rule_id: str) -> GuardrailRule | None:
        return next((r for r in self.rules if r.rule_id == rule_id), None)

    def run(self, stage: str, payload: dict) -> GuardrailVerdict:
        """Run every rule declared for ``stage`` against ``payload``.

        Payload keys by stage — upload: filename, data; pre_prompt: text,
        source (``prompt`` or ``retrieved``); post_output: assessment, store.
        """
        if stage not in STAGES:
            raise ValueError(f"unknown guardrail stage {stage!r}")
        findings: list[GuardrailFinding] = []
        for rule in self.stage_rules(stage):
            findings.extend(self._apply(rule, payload))
        return GuardrailVerdict.from_findings(stage, findings)

    def _apply(self, rule: GuardrailRule, payload: dict) -> list[GuardrailFinding]:
        if rule.stage == "upload":
            if rule.rule_id == "pii_upload":
                text = _safe_decode(payload["data"])
                return [
                    GuardrailFinding("pii_upload", rule.severity,
                                     f"{f.kind} detected: {f.matched_text}",
                                     f"chars {f.char_span[0]}-{f.char_span[1]}")
                    for f in scan_pii(text, tuple(self._param(rule, "id_patterns", ())))
                ]
            verdict = validate_upload(
                payload["filename"], payload["data"],
                allowed_extensions=tuple(
                    self._param(rule, "allowed_extensions", DEFAULT_ALLOWED_EXTENSIONS)),
                max_bytes=self._param(rule, "max_bytes", DEFAULT_MAX_UPLOAD_BYTES))
            return [f for f in verdict.findings if f.rule_id == rule.rule_id]
        if rule.rule_id == "pii_prompt":
            return [
                GuardrailFinding("pii_prompt", rule.severity,
                                 f"{f.kind} in outbound prompt: {f.matched_text}",
                                 f"chars {f.char_span[0]}-{f.char_span[1]}")
                for f in scan_pii(payload["text"],
                                  tuple(self._param(rule, "id_patterns", ())))
            ]
        if rule.rule_id == "prompt_injection":
            if payload.get("source") == "prompt":
                # The assembled prompt legitimately contains role imperatives;
                # injection scanning applies to retrieved content only.
                return []
            return detect_prompt_injection(payload["text"], severity=rule.severity)
        if rule.rule_id == "attribution":
            verdict = verify_attribution(payload["assessment"], payload["store"])
            return list(verdict.findings)
        return []

    @staticmethod
    def _param(rule: GuardrailRule, key: str, default):
        return rule.params.get(key, default)


def _safe_decode(data: bytes) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        return ""
