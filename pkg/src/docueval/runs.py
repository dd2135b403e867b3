"""Run-level data model: configuration, per-criterion assessments, runs.

An :class:`EvaluationConfig` captures everything that shapes a run; its
canonical digest is stored with the run so any result can be traced to the
exact setup that produced it. ``run_digest`` hashes the semantic content of
a run (excluding ids, timestamps and the parallelism knob) — two runs of
the same subject and config under a deterministic provider produce equal
digests regardless of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .canonical import digest_of

SCHEMA_VERSION = 1

REASONING_STRATEGIES = (
    "before_scoring", "after_scoring", "chain_of_thought", "deep_reasoning_planning")
ASSESSMENT_STYLES = ("scored", "qualitative")
AGGREGATIONS = ("weighted_average", "simple_average")


@dataclass(frozen=True)
class EvaluationConfig:
    evaluator_id: str
    evaluator_version: int
    reasoning_strategy: str = "before_scoring"
    assessment_style: str = "scored"
    aggregation: str = "weighted_average"
    score_scale: tuple[int, int] = (1, 5)
    retrieval_k: int = 5
    max_context_chars: int = 16000
    include_subject_in_retrieval: bool = False
    provider: dict = field(default_factory=lambda: {"name": "stub", "params": {"seed": 0}})
    parallelism: int = 4

    def __post_init__(self):
        if self.reasoning_strategy not in REASONING_STRATEGIES:
            raise ValueError(f"unknown reasoning_strategy {self.reasoning_strategy!r}")
        if self.assessment_style not in ASSESSMENT_STYLES:
            raise ValueError(f"unknown assessment_style {self.assessment_style!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        lo, hi = self.score_scale
        if not (isinstance(lo, int) and isinstance(hi, int) and lo < hi):
            raise ValueError(f"score_scale must be integers with min < max, got {self.score_scale}")
        if self.retrieval_k < 0:
            raise ValueError("retrieval_k must be >= 0")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.max_context_chars < 1:
            raise ValueError("max_context_chars must be positive")

    @property
    def evaluator_ref(self) -> tuple[str, int]:
        return (self.evaluator_id, self.evaluator_version)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "evaluator_id": self.evaluator_id,
            "evaluator_version": self.evaluator_version,
            "reasoning_strategy": self.reasoning_strategy,
            "assessment_style": self.assessment_style,
            "aggregation": self.aggregation,
            "score_scale": list(self.score_scale),
            "retrieval_k": self.retrieval_k,
            "max_context_chars": self.max_context_chars,
            "include_subject_in_retrieval": self.include_subject_in_retrieval,
            "provider": self.provider,
            "parallelism": self.parallelism,
        }

    def semantic_dict(self) -> dict:
        """Config fields that can affect results (parallelism is scheduling only)."""
        d = self.to_dict()
        d.pop("parallelism")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationConfig":
        return cls(
            evaluator_id=d["evaluator_id"],
            evaluator_version=d["evaluator_version"],
            reasoning_strategy=d.get("reasoning_strategy", "before_scoring"),
            assessment_style=d.get("assessment_style", "scored"),
            aggregation=d.get("aggregation", "weighted_average"),
            score_scale=tuple(d.get("score_scale", (1, 5))),
            retrieval_k=d.get("retrieval_k", 5),
            max_context_chars=d.get("max_context_chars", 16000),
            include_subject_in_retrieval=d.get("include_subject_in_retrieval", False),
            provider=d.get("provider", {"name": "stub", "params": {"seed": 0}}),
            parallelism=d.get("parallelism", 4),
        )


@dataclass(frozen=True)
class AttributedClaim:
    claim_text: str
    evidence: tuple[tuple[str, str], ...]

    def to_dict(self) -> dict:
        return {
            "claim_text": self.claim_text,
            "evidence": [{"segment_id": sid, "quote": quote} for sid, quote in self.evidence],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AttributedClaim":
        return cls(
            claim_text=d["claim_text"],
            evidence=tuple((e["segment_id"], e["quote"]) for e in d["evidence"]),
        )


@dataclass(frozen=True)
class CriterionAssessment:
    criterion_id: str
    score: int | None
    rationale: str
    claims: tuple[AttributedClaim, ...]
    raw_model_output: str
    queries_used: tuple[str, ...] = ()
    steps: tuple[str, ...] | None = None
    plan: tuple[str, ...] | None = None

    def to_dict(self) -> dict:
        return {
            "criterion_id": self.criterion_id,
            "score": self.score,
            "rationale": self.rationale,
            "claims": [c.to_dict() for c in self.claims],
            "raw_model_output": self.raw_model_output,
            "queries_used": list(self.queries_used),
            "steps": list(self.steps) if self.steps is not None else None,
            "plan": list(self.plan) if self.plan is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CriterionAssessment":
        return cls(
            criterion_id=d["criterion_id"],
            score=d["score"],
            rationale=d["rationale"],
            claims=tuple(AttributedClaim.from_dict(c) for c in d["claims"]),
            raw_model_output=d["raw_model_output"],
            queries_used=tuple(d.get("queries_used", ())),
            steps=tuple(d["steps"]) if d.get("steps") is not None else None,
            plan=tuple(d["plan"]) if d.get("plan") is not None else None,
        )


RUN_STATUSES = ("running", "completed", "failed")


@dataclass(frozen=True)
class EvaluationRun:
    run_id: str
    config: EvaluationConfig
    config_digest: str
    subject_doc_id: str
    assessments: tuple[CriterionAssessment, ...]
    overall_score: float | None
    started_at: str
    finished_at: str | None
    provider_transcript_ref: str
    status: str = "completed"
    errors: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "run_id": self.run_id,
            "config": self.config.to_dict(),
            "config_digest": self.config_digest,
            "subject_doc_id": self.subject_doc_id,
            "assessments": [a.to_dict() for a in self.assessments],
            "overall_score": self.overall_score,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "provider_transcript_ref": self.provider_transcript_ref,
            "status": self.status,
            "errors": self.errors,
            "run_digest": self.run_digest(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationRun":
        return cls(
            run_id=d["run_id"],
            config=EvaluationConfig.from_dict(d["config"]),
            config_digest=d["config_digest"],
            subject_doc_id=d["subject_doc_id"],
            assessments=tuple(CriterionAssessment.from_dict(a) for a in d["assessments"]),
            overall_score=d["overall_score"],
            started_at=d["started_at"],
            finished_at=d["finished_at"],
            provider_transcript_ref=d["provider_transcript_ref"],
            status=d.get("status", "completed"),
            errors=d.get("errors", {}),
        )

    def run_digest(self) -> str:
        """Digest of everything semantic: excludes run_id, timestamps, transcript ref."""
        return digest_of({
            "subject_doc_id": self.subject_doc_id,
            "config": self.config.semantic_dict(),
            "assessments": [a.to_dict() for a in self.assessments],
            "overall_score": self.overall_score,
            "status": self.status,
            "errors": self.errors,
        })
