"""Blind human-review workflow and human/AI comparison.

A review session gates AI results behind the reviewer's own submission:
``awaiting_human -> human_submitted -> revealed -> annotated`` are the only
legal transitions, and no session-scoped read path returns any assessment
content before reveal. Every transition, reveal and annotation appends one
audit record; annotations are additionally exported to the feedback log
(export only — nothing is ever auto-applied to a model).
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, replace
from datetime import datetime, timezone

from .engine import run_evaluation
from .errors import (
    InvalidState,
    PartialFailure,
    PrematureReveal,
    ResultsGated,
    RunPending,
    ScoreOutOfRange,
    SubjectMismatch,
    UnknownTarget,
)
from .persistence import Store
from .runs import EvaluationConfig, EvaluationRun

SESSION_STATES = ("awaiting_human", "human_submitted", "revealed", "annotated")
ANNOTATION_VERDICTS = ("agree", "disagree", "flag_incorrect")

_LEGAL_TRANSITIONS = {
    ("awaiting_human", "human_submitted"),
    ("human_submitted", "revealed"),
    ("revealed", "annotated"),
    ("annotated", "annotated"),
}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class HumanReview:
    entries: tuple[dict, ...]
    submitted_at: str

    def to_dict(self) -> dict:
        return {"entries": list(self.entries), "submitted_at": self.submitted_at}

    @classmethod
    def from_dict(cls, d: dict) -> "HumanReview":
        return cls(entries=tuple(d["entries"]), submitted_at=d["submitted_at"])

    def score_for(self, criterion_id: str):
        for entry in self.entries:
            if entry["criterion_id"] == criterion_id:
                return entry.get("score")
        return None

    def comments_for(self, criterion_id: str) -> str:
        for entry in self.entries:
            if entry["criterion_id"] == criterion_id:
                return entry.get("comments", "")
        return ""


@dataclass(frozen=True)
class Annotation:
    annotation_id: str
    target: str
    verdict: str
    explanation: str
    created_at: str

    def to_dict(self) -> dict:
        return {"annotation_id": self.annotation_id, "target": self.target,
                "verdict": self.verdict, "explanation": self.explanation,
                "created_at": self.created_at}

    @classmethod
    def from_dict(cls, d: dict) -> "Annotation":
        return cls(**d)


@dataclass(frozen=True)
class ReviewSession:
    session_id: str
    subject_doc_id: str
    run_id: str
    state: str
    config: EvaluationConfig
    created_at: str
    human_review: HumanReview | None = None
    annotations: tuple[Annotation, ...] = ()

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "session_id": self.session_id,
            "subject_doc_id": self.subject_doc_id,
            "run_id": self.run_id,
            "state": self.state,
            "config": self.config.to_dict(),
            "created_at": self.created_at,
            "human_review": self.human_review.to_dict() if self.human_review else None,
            "annotations": [a.to_dict() for a in self.annotations],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReviewSession":
        return cls(
            session_id=d["session_id"],
            subject_doc_id=d["subject_doc_id"],
            run_id=d["run_id"],
            state=d["state"],
            config=EvaluationConfig.from_dict(d["config"]),
            created_at=d["created_at"],
            human_review=HumanReview.from_dict(d["human_review"])
            if d.get("human_review") else None,
            annotations=tuple(Annotation.from_dict(a) for a in d.get("annotations", ())),
        )


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[dict, ...]
    agreement_summary: dict

    def to_dict(self) -> dict:
        return {"rows": list(self.rows), "agreement_summary": self.agreement_summary}


@dataclass(frozen=True)
class ExplanationPack:
    run_id: str
    rows: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {"run_id": self.run_id, "rows": list(self.rows)}


class SessionManager:
    """Per-session serialized state transitions over the store."""

    def __init__(self, store: Store):
        self.store = store
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    # --- lifecycle --------------------------------------------------------

    def open_session(self, subject_doc_id: str, config: EvaluationConfig,
                     execute_run: bool = True) -> ReviewSession:
        """Open a blind session; the AI run starts eagerly but stays hidden.

        With ``execute_run`` the run executes synchronously before this
        returns (results remain gated); callers that schedule the run in the
        background pass False and call :meth:`execute_pending_run` themselves.
        """
        self.store.get_document(subject_doc_id)
        session = ReviewSession(
            session_id="s-" + uuid.uuid4().hex[:10],
            subject_doc_id=subject_doc_id,
            run_id=self.store.new_run_id(),
            state="awaiting_human",
            config=config,
            created_at=_now(),
        )
        self.store.save_session(session.to_dict())
        self.store.audit.append("session_opened",
                                {"session_id": session.session_id,
                                 "subject_doc_id": subject_doc_id,
                                 "run_id": session.run_id}, actor="user")
        if execute_run:
            self.execute_pending_run(session.session_id)
        return self.load(session.session_id)

    def execute_pending_run(self, session_id: str) -> None:
        """Run the session's hidden evaluation; failures are stored, not raised."""
        session = self.load(session_id)
        if self.store.run_exists(session.run_id):
            return
        try:
            run_evaluation(session.subject_doc_id, session.config, self.store,
                           run_id=session.run_id)
        except PartialFailure:
            # The failed run is persisted; the session can still be revealed
            # to show what completed and what failed.
            pass

    def load(self, session_id: str) -> ReviewSession:
        return ReviewSession.from_dict(self.store.load_session_dict(session_id))

    # --- transitions --------------------------------------------------------

    def _transition(self, session: ReviewSession, new_state: str) -> None:
        if (session.state, new_state) not in _LEGAL_TRANSITIONS:
            raise InvalidState(
                f"illegal transition {session.state} -> {new_state}")

    def submit_human_review(self, session_id: str, entries: list[dict]) -> ReviewSession:
        with self._lock(session_id):
            session = self.load(session_id)
            self._transition(session, "human_submitted")
            lo, hi = session.config.score_scale
            seen: set[str] = set()
            for entry in entries:
                criterion_id = entry["criterion_id"]
                if criterion_id in seen:
                    raise InvalidState(
                        f"criterion {criterion_id!r} reviewed more than once")
                seen.add(criterion_id)
                score = entry.get("score")
                if score is not None and not (lo <= score <= hi):
                    raise ScoreOutOfRange(
                        f"human score {score} outside scale ({lo}, {hi})")
            review = HumanReview(entries=tuple(dict(e) for e in entries),
                                 submitted_at=_now())
            session = replace(session, state="human_submitted", human_review=review)
            self.store.save_session(session.to_dict())
        self.store.audit.append("human_review_submitted",
                                {"session_id": session_id,
                                 "entries": list(review.entries)}, actor="user")
        return session

    def reveal_ai_results(self, session_id: str) -> tuple[EvaluationRun, ComparisonReport]:
        with self._lock(session_id):
            session = self.load(session_id)
            if session.state == "awaiting_human":
                raise PrematureReveal(
                    "AI results cannot be revealed before the human review is submitted")
            self._transition(session, "revealed")
            if not self.store.run_exists(session.run_id):
                raise RunPending(f"AI run {session.run_id} has not finished")
            run = self.store.load_run(session.run_id)
            report = self._comparison(session, run)
            session = replace(session, state="revealed")
            self.store.save_session(session.to_dict())
        self.store.audit.append("ai_results_revealed",
                                {"session_id": session_id, "run_id": run.run_id},
                                actor="user")
        return run, report

    def get_ai_results(self, session_id: str) -> tuple[EvaluationRun, ComparisonReport]:
        """Session-scoped read of AI results; gated until revealed."""
        session = self.load(session_id)
        if session.state in ("awaiting_human", "human_submitted"):
            raise ResultsGated(
                f"session {session_id} has not revealed AI results yet")
        run = self.store.load_run(session.run_id)
        return run, self._comparison(session, run)

    def annotate(self, session_id: str, target: str, verdict: str,
                 explanation: str) -> ReviewSession:
        if verdict not in ANNOTATION_VERDICTS:
            raise ValueError(f"unknown verdict {verdict!r}")
        with self._lock(session_id):
            session = self.load(session_id)
            self._transition(session, "annotated")
            run = self.store.load_run(session.run_id)
            valid_targets = {a.criterion_id for a in run.assessments} | {"overall"}
            if target not in valid_targets:
                raise UnknownTarget(f"annotation target {target!r} not in run")
            annotation = Annotation(
                annotation_id="a-" + uuid.uuid4().hex[:10],
                target=target, verdict=verdict, explanation=explanation,
                created_at=_now())
            session = replace(session, state="annotated",
                              annotations=session.annotations + (annotation,))
            self.store.save_session(session.to_dict())
        self.store.audit.append("annotation_added",
                                {"session_id": session_id,
                                 **annotation.to_dict()}, actor="user")
        self.store.append_feedback({
            "session_id": session_id,
            "run_id": session.run_id,
            "criterion_id": None if target == "overall" else target,
            "target": target,
            "verdict": verdict,
            "explanation": explanation,
            "created_at": annotation.created_at,
        })
        return session

    # --- reports ------------------------------------------------------------

    def _comparison(self, session: ReviewSession, run: EvaluationRun) -> ComparisonReport:
        return build_comparison(session, run, self.store)


def build_comparison(session: ReviewSession, run: EvaluationRun,
                     store: Store) -> ComparisonReport:
    """Side-by-side rows in criterion order; delta = ai − human, exact."""
    evaluator = store.load_evaluator(run.config.evaluator_id,
                                     run.config.evaluator_version)
    review = session.human_review
    by_id = {a.criterion_id: a for a in run.assessments}
    rows = []
    matching = 0
    compared = 0
    for criterion in evaluator.criteria:
        assessment = by_id.get(criterion.criterion_id)
        ai_score = assessment.score if assessment else None
        human_score = review.score_for(criterion.criterion_id) if review else None
        delta = (ai_score - human_score
                 if ai_score is not None and human_score is not None else None)
        if delta is not None:
            compared += 1
            if delta == 0:
                matching += 1
        rows.append({
            "criterion_id": criterion.criterion_id,
            "criterion_name": criterion.name,
            "human_score": human_score,
            "ai_score": ai_score,
            "delta": delta,
            "human_comments": review.comments_for(criterion.criterion_id) if review else "",
            "ai_rationale_excerpt": (assessment.rationale[:400] if assessment else ""),
        })
    return ComparisonReport(
        rows=tuple(rows),
        agreement_summary={"matching": matching, "compared": compared,
                           "total": len(rows)},
    )


def build_explanation_pack(run: EvaluationRun, store: Store) -> ExplanationPack:
    """Structured rationale table: one row per criterion, verified evidence only."""
    evaluator = store.load_evaluator(run.config.evaluator_id,
                                     run.config.evaluator_version)
    by_id = {a.criterion_id: a for a in run.assessments}
    rows = []
    for criterion in evaluator.criteria:
        assessment = by_id.get(criterion.criterion_id)
        evidence = []
        if assessment:
            for claim in assessment.claims:
                for segment_id, quote in claim.evidence:
                    evidence.append({"segment_id": segment_id, "quote": quote,
                                     "claim_text": claim.claim_text})
        rows.append({
            "criterion_id": criterion.criterion_id,
            "criterion_name": criterion.name,
            "score": assessment.score if assessment else None,
            "justification": assessment.rationale if assessment else "",
            "evidence": evidence,
            "guidance_refs": list(criterion.guidance_refs),
            "no_evidence": not evidence,
        })
    return ExplanationPack(run_id=run.run_id, rows=tuple(rows))


_DIFF_FIELDS = (
    "reasoning_strategy", "assessment_style", "aggregation", "score_scale",
    "retrieval_k", "max_context_chars", "include_subject_in_retrieval", "provider",
)


def compare_runs(run_a: EvaluationRun, run_b: EvaluationRun, store: Store) -> dict:
    """Structural config diff plus per-criterion score deltas (matched by name).

    Parallelism is a scheduling knob that cannot affect results, so it is
    not part of the structural diff.
    """
    if run_a.subject_doc_id != run_b.subject_doc_id:
        raise SubjectMismatch(
            f"runs target different subjects: {run_a.subject_doc_id} vs "
            f"{run_b.subject_doc_id}")

    evaluator_a = store.load_evaluator(run_a.config.evaluator_id,
                                       run_a.config.evaluator_version)
    evaluator_b = store.load_evaluator(run_b.config.evaluator_id,
                                       run_b.config.evaluator_version)

    dict_a, dict_b = run_a.config.to_dict(), run_b.config.to_dict()
    config_diff = [
        {"field": field_name, "a": dict_a[field_name], "b": dict_b[field_name]}
        for field_name in _DIFF_FIELDS
        if dict_a[field_name] != dict_b[field_name]
    ]
    if evaluator_a.role_digest() != evaluator_b.role_digest():
        config_diff.append({"field": "role_digest", "a": evaluator_a.role_digest(),
                            "b": evaluator_b.role_digest()})
    if evaluator_a.criteria_digest() != evaluator_b.criteria_digest():
        weights_a = {c.name: c.weight for c in evaluator_a.criteria}
        weights_b = {c.name: c.weight for c in evaluator_b.criteria}
        names_differ = set(weights_a) != set(weights_b)
        descriptions_a = {c.name: (c.description, c.guidance_refs)
                          for c in evaluator_a.criteria}
        descriptions_b = {c.name: (c.description, c.guidance_refs)
                          for c in evaluator_b.criteria}
        if names_differ or descriptions_a != descriptions_b:
            config_diff.append({"field": "criteria_digest",
                                "a": evaluator_a.criteria_digest(),
                                "b": evaluator_b.criteria_digest()})
        if not names_differ and weights_a != weights_b:
            config_diff.append({"field": "weights", "a": weights_a, "b": weights_b})

    scores_a = {a.criterion_id: a.score for a in run_a.assessments}
    scores_b = {a.criterion_id: a.score for a in run_b.assessments}
    names_a = {c.criterion_id: c.name for c in evaluator_a.criteria}
    names_b = {c.name: c.criterion_id for c in evaluator_b.criteria}

    criterion_rows = []
    unmatched_a, unmatched_b = [], []
    matched_b_names = set()
    for criterion in evaluator_a.criteria:
        name = criterion.name
        if name in names_b:
            matched_b_names.add(name)
            score_a = scores_a.get(criterion.criterion_id)
            score_b = scores_b.get(names_b[name])
            delta = (score_b - score_a
                     if score_a is not None and score_b is not None else None)
            criterion_rows.append({"criterion_name": name, "score_a": score_a,
                                   "score_b": score_b, "delta": delta})
        else:
            unmatched_a.append(name)
    for criterion in evaluator_b.criteria:
        if criterion.name not in matched_b_names:
            unmatched_b.append(criterion.name)

    return {
        "schema_version": 1,
        "run_a": run_a.run_id,
        "run_b": run_b.run_id,
        "subject_doc_id": run_a.subject_doc_id,
        "config_diff": config_diff,
        "overall_a": run_a.overall_score,
        "overall_b": run_b.overall_score,
        "criteria": criterion_rows,
        "unmatched_criteria_a": unmatched_a,
        "unmatched_criteria_b": unmatched_b,
    }
