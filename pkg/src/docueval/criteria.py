"""Evaluator profiles: theory-grounded roles and versioned criterion sets.

Profiles are immutable snapshots. Any edit produces version n+1 while
version n stays retrievable byte-for-byte, so a stored run's
(evaluator_id, version) reference always resolves to exactly what it saw.
Inheritance deep-copies an existing profile under a fresh id with the
parent lineage recorded; child edits never touch the parent.
"""

from __future__ import annotations

import json
import re
import uuid
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from fractions import Fraction

from .canonical import digest_of
from .errors import DuplicateCriterionName, EmptyGuidance, NonPositiveWeight
from .ingestion import ParsedDocument, Segment, normalize_ws
from .providers import (
    FIELD_CRITERIA_LIST,
    PromptEnvelope,
    Provider,
    ResponseSchema,
)

SCHEMA_VERSION = 1


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _slug(name: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")
    return slug or "criterion"


def _check_weight(weight) -> float:
    try:
        value = float(weight)
    except (TypeError, ValueError):
        raise NonPositiveWeight(f"weight {weight!r} is not a number") from None
    if not value > 0 or value != value or value == float("inf"):
        raise NonPositiveWeight(f"weight must be positive, got {weight!r}")
    return value


@dataclass(frozen=True)
class Criterion:
    criterion_id: str
    name: str
    description: str
    weight: float
    guidance_refs: tuple[str, ...] = ()

    def __post_init__(self):
        _check_weight(self.weight)

    @classmethod
    def create(cls, name: str, description: str = "", weight: float = 1.0,
               guidance_refs=()) -> "Criterion":
        return cls(criterion_id=_slug(name), name=name, description=description,
                   weight=_check_weight(weight), guidance_refs=tuple(guidance_refs))

    def to_dict(self) -> dict:
        return {
            "criterion_id": self.criterion_id,
            "name": self.name,
            "description": self.description,
            "weight": self.weight,
            "guidance_refs": list(self.guidance_refs),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Criterion":
        return cls(criterion_id=d["criterion_id"], name=d["name"],
                   description=d["description"], weight=d["weight"],
                   guidance_refs=tuple(d.get("guidance_refs", ())))


@dataclass(frozen=True)
class RoleSpec:
    role_name: str
    role_statement: str
    theory_sources: tuple[tuple[str, tuple[str, ...]], ...] = ()

    def __post_init__(self):
        if not self.role_statement.strip():
            raise ValueError("role_statement must be non-empty")

    def to_dict(self) -> dict:
        return {
            "role_name": self.role_name,
            "role_statement": self.role_statement,
            "theory_sources": [
                {"doc_id": doc_id, "segment_ids": list(seg_ids)}
                for doc_id, seg_ids in self.theory_sources
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoleSpec":
        return cls(
            role_name=d["role_name"],
            role_statement=d["role_statement"],
            theory_sources=tuple(
                (s["doc_id"], tuple(s["segment_ids"])) for s in d.get("theory_sources", ())
            ),
        )


@dataclass(frozen=True)
class EvaluatorProfile:
    evaluator_id: str
    version: int
    parent: tuple[str, int] | None
    role: RoleSpec
    criteria: tuple[Criterion, ...]
    created_at: str

    def criterion_by_id(self, criterion_id: str) -> Criterion | None:
        for criterion in self.criteria:
            if criterion.criterion_id == criterion_id:
                return criterion
        return None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "evaluator_id": self.evaluator_id,
            "version": self.version,
            "parent": list(self.parent) if self.parent else None,
            "role": self.role.to_dict(),
            "criteria": [c.to_dict() for c in self.criteria],
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluatorProfile":
        parent = d.get("parent")
        return cls(
            evaluator_id=d["evaluator_id"],
            version=d["version"],
            parent=(parent[0], parent[1]) if parent else None,
            role=RoleSpec.from_dict(d["role"]),
            criteria=tuple(Criterion.from_dict(c) for c in d["criteria"]),
            created_at=d["created_at"],
        )

    def digest(self) -> str:
        return digest_of(self.to_dict())

    def role_digest(self) -> str:
        return digest_of(self.role.to_dict())

    def criteria_digest(self) -> str:
        return digest_of([c.to_dict() for c in self.criteria])


def _check_criteria(criteria) -> tuple[Criterion, ...]:
    seen: set[str] = set()
    out = []
    for criterion in criteria:
        _check_weight(criterion.weight)
        if criterion.name in seen:
            raise DuplicateCriterionName(f"criterion name {criterion.name!r} is duplicated")
        seen.add(criterion.name)
        out.append(criterion)
    return tuple(out)


def _dedupe_ids(criteria: tuple[Criterion, ...]) -> tuple[Criterion, ...]:
    seen: dict[str, int] = {}
    out = []
    for criterion in criteria:
        cid = criterion.criterion_id
        if cid in seen:
            seen[cid] += 1
            criterion = replace(criterion, criterion_id=f"{cid}-{seen[cid]}")
        else:
            seen[cid] = 1
        out.append(criterion)
    return tuple(out)


def create_evaluator(role: RoleSpec, criteria, evaluator_id: str | None = None) -> EvaluatorProfile:
    """New evaluator at version 1 with no parent."""
    checked = _dedupe_ids(_check_criteria(criteria))
    return EvaluatorProfile(
        evaluator_id=evaluator_id or "ev-" + uuid.uuid4().hex[:10],
        version=1,
        parent=None,
        role=role,
        criteria=checked,
        created_at=_now(),
    )


def inherit_evaluator(parent: EvaluatorProfile,
                      evaluator_id: str | None = None) -> EvaluatorProfile:
    """Deep copy of role and criteria under a fresh id, lineage recorded."""
    return EvaluatorProfile(
        evaluator_id=evaluator_id or "ev-" + uuid.uuid4().hex[:10],
        version=1,
        parent=(parent.evaluator_id, parent.version),
        role=RoleSpec.from_dict(parent.role.to_dict()),
        criteria=tuple(Criterion.from_dict(c.to_dict()) for c in parent.criteria),
        created_at=_now(),
    )


def upsert_criterion(evaluator: EvaluatorProfile, criterion: Criterion) -> EvaluatorProfile:
    """Version n+1 with ``criterion`` added or (matched by id) replaced."""
    _check_weight(criterion.weight)
    updated = list(evaluator.criteria)
    index = next((i for i, c in enumerate(updated)
                  if c.criterion_id == criterion.criterion_id), None)
    if index is None:
        updated.append(criterion)
    else:
        updated[index] = criterion
    checked = _check_criteria(updated)
    return replace(evaluator, version=evaluator.version + 1,
                   criteria=checked, created_at=_now())


def effective_weights(criteria) -> list[float]:
    """Weights normalized to sum to 1, order preserved, ratios exact."""
    weights = [_check_weight(c.weight if isinstance(c, Criterion) else c) for c in criteria]
    total = sum(Fraction(w) for w in weights)
    return [float(Fraction(w) / total) for w in weights]


_EXTRACTION_SCHEMA = ResponseSchema(name="extract_criteria",
                                    fields={"criteria": FIELD_CRITERIA_LIST})


def extract_criteria(guidance: ParsedDocument, provider: Provider | None = None,
                     segments: list[Segment] | None = None) -> list[Criterion]:
    """Extract criteria from a guidance document.

    With a provider, asks for structured output; on provider absence or
    malformed output falls back to heading-based extraction: each level-2
    section becomes a criterion (weight 1, description = section text).
    Every criterion carries guidance_refs to its source segments.
    """
    if guidance.document.doc_class != "criteria_guidance":
        raise ValueError("extract_criteria requires a criteria_guidance document")
    segments = segments if segments is not None else []

    if provider is not None:
        extracted = _provider_extraction(guidance, provider, segments)
        if extracted:
            return extracted

    extracted = _heading_extraction(guidance, segments)
    if not extracted:
        raise EmptyGuidance(
            f"guidance document {guidance.document.doc_id} yields no criteria")
    return extracted


def _heading_extraction(guidance: ParsedDocument, segments: list[Segment]) -> list[Criterion]:
    body = guidance.document.body
    criteria = []
    for node in guidance.root.walk():
        if node.level != 2:
            continue
        start, end = node.span
        section_text = body[start:end]
        # Drop the heading line itself from the description.
        head, _, rest = section_text.partition("\n")
        description = normalize_ws(rest)
        refs = _refs_for_span(segments, (start, end))
        criteria.append(Criterion.create(node.heading, description=description,
                                         weight=1.0, guidance_refs=refs))
    return list(_dedupe_ids(_check_criteria(criteria)))


def _refs_for_span(segments: list[Segment], span: tuple[int, int]) -> tuple[str, ...]:
    lo, hi = span
    return tuple(s.segment_id for s in segments
                 if s.char_span[0] < hi and s.char_span[1] > lo)


def _provider_extraction(guidance: ParsedDocument, provider: Provider,
                         segments: list[Segment]) -> list[Criterion]:
    rendered = "\n".join(f"[seg:{s.segment_id}]\n{s.text}" for s in segments) \
        or guidance.document.body
    envelope = PromptEnvelope(
        system_text=("You extract assessment criteria from guidance documents "
                     "and emit them as structured output."),
        user_text=(f"### GUIDANCE DOCUMENT: {guidance.document.title}\n{rendered}\n\n"
                   "List the assessment criteria this guidance defines."),
        schema=_EXTRACTION_SCHEMA,
    )
    try:
        payload = json.loads(provider.complete(envelope))
        rows = payload["criteria"]
        assert isinstance(rows, list) and rows
        criteria = []
        for row in rows:
            name = str(row["name"]).strip()
            if not name:
                raise ValueError("empty criterion name")
            refs = _refs_for_name(segments, name)
            criteria.append(Criterion.create(
                name, description=str(row.get("description", "")),
                weight=float(row.get("weight", 1.0)), guidance_refs=refs))
        return list(_dedupe_ids(_check_criteria(criteria)))
    except Exception:
        # Malformed provider output: fall back to heading-based extraction.
        return []


def _refs_for_name(segments: list[Segment], name: str) -> tuple[str, ...]:
    lowered = name.lower()
    hits = tuple(
        s.segment_id for s in segments
        if lowered in " / ".join(s.section_path).lower() or lowered in s.text.lower()
    )
    return hits or tuple(s.segment_id for s in segments)
