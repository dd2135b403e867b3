"""Evaluation orchestration.

Each criterion is assessed individually: dynamic query generation, retrieval
against the reference and example indexes, context assembly under a
character budget, strategy-specific prompting, strict output parsing, and
attribution verification. Criteria may run concurrently up to the configured
bound; results are assembled in criterion order, so a deterministic provider
yields the same run for any parallelism value.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction

from .criteria import Criterion, RoleSpec, effective_weights
from .errors import (
    BudgetTooSmall,
    GuardrailBlocked,
    MissingScore,
    PartialFailure,
)
from .guardrails import GuardrailPipeline
from .ingestion import ParsedDocument, Segment
from .persistence import RETRIEVAL_CLASSES, Store, snapshot_config
from .prompts import (
    assemble_prompt,
    build_second_call,
    complete_and_parse,
)
from .providers import (
    FIELD_QUERIES,
    PromptEnvelope,
    Provider,
    ResponseSchema,
    build_provider,
)
from .retrieval import RetrievalResult, VectorIndex, index_segments
from .runs import (
    AttributedClaim,
    CriterionAssessment,
    EvaluationConfig,
    EvaluationRun,
)

_QUERY_SCHEMA = ResponseSchema(name="generate_queries", fields={"queries": FIELD_QUERIES})
_MAX_QUERIES = 3


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def generate_queries(criterion: Criterion, subject: ParsedDocument,
                     provider: Provider | None = None) -> list[str]:
    """Context-aware search queries for one criterion (1 to 3).

    Provider-generated when a provider is available and emits usable output;
    otherwise the deterministic fallback: criterion name + subject title,
    and the first twelve words of the criterion description.
    """
    if provider is not None:
        envelope = PromptEnvelope(
            system_text="You produce short semantic search queries for grounding "
                        "a criterion assessment in reference material.",
            user_text=(f"Criterion: {criterion.name}\n"
                       f"Criterion description: {criterion.description}\n"
                       f"Subject document title: {subject.document.title}"),
            schema=_QUERY_SCHEMA,
        )
        try:
            payload = json.loads(provider.complete(envelope))
            queries = [q.strip() for q in payload["queries"]
                       if isinstance(q, str) and q.strip()]
            if queries:
                return queries[:_MAX_QUERIES]
        except Exception:
            pass
    queries = [f"{criterion.name} {subject.document.title}".strip()]
    description_words = criterion.description.split()
    if description_words:
        queries.append(" ".join(description_words[:12]))
    return queries


@dataclass
class ContextBundle:
    criterion: Criterion
    role: RoleSpec
    subject_title: str
    subject_segments: list[Segment]
    reference: list[tuple[RetrievalResult, Segment]]
    examples: list[tuple[RetrievalResult, Segment]]
    total_chars: int
    queries: list[str] = field(default_factory=list)
    excluded_segments: list[dict] = field(default_factory=list)


def _bundle_chars(criterion: Criterion, role: RoleSpec,
                  subject: list[Segment],
                  reference: list[tuple[RetrievalResult, Segment]],
                  examples: list[tuple[RetrievalResult, Segment]]) -> int:
    fixed = (len(criterion.name) + len(criterion.description)
             + len(role.role_name) + len(role.role_statement))
    return (fixed + sum(len(s.text) for s in subject)
            + sum(len(s.text) for _, s in reference)
            + sum(len(s.text) for _, s in examples))


def _union_results(per_query: list[list[RetrievalResult]]) -> list[RetrievalResult]:
    """Union by segment_id keeping max similarity; re-ranked densely."""
    best: dict[str, float] = {}
    for results in per_query:
        for result in results:
            if result.segment_id not in best or result.similarity > best[result.segment_id]:
                best[result.segment_id] = result.similarity
    ordered = sorted(best.items(), key=lambda item: (-item[1], item[0]))
    return [RetrievalResult(segment_id=sid, similarity=sim, rank=rank)
            for rank, (sid, sim) in enumerate(ordered, start=1)]


def aggregate_context(criterion: Criterion, role: RoleSpec, subject: ParsedDocument,
                      subject_segments: list[Segment], store: Store,
                      config: EvaluationConfig, provider: Provider | None = None,
                      pipeline: GuardrailPipeline | None = None,
                      subject_index: VectorIndex | None = None) -> ContextBundle:
    """Assemble one criterion's context under the character budget.

    Retrieved items flagged by the injection guardrail are excluded (and the
    exclusion audited). Over budget, retrieved items are dropped
    lowest-similarity-first, then subject segments tail-first; the criterion
    and role text are never dropped.
    """
    pipeline = pipeline or GuardrailPipeline()
    budget = config.max_context_chars
    fixed = (len(criterion.name) + len(criterion.description)
             + len(role.role_name) + len(role.role_statement))
    if fixed > budget:
        raise BudgetTooSmall(
            f"criterion and role text alone ({fixed} chars) exceed the "
            f"context budget ({budget})")

    queries = generate_queries(criterion, subject, provider)
    query_vectors = [store.embedder(q) for q in queries]

    retrieved: dict[str, list[tuple[RetrievalResult, Segment]]] = {}
    excluded: list[dict] = []
    search_plan: list[tuple[str, VectorIndex | None]] = [
        (doc_class, store.load_index(doc_class)) for doc_class in RETRIEVAL_CLASSES]
    if config.include_subject_in_retrieval and subject_index is not None:
        search_plan.append(("subject", subject_index))

    for doc_class, index in search_plan:
        if config.retrieval_k == 0 or index is None or len(index) == 0:
            retrieved[doc_class] = []
            continue
        unioned = _union_results([
            index.search(qv, config.retrieval_k, class_filter=doc_class)
            for qv in query_vectors])
        kept = []
        for result in unioned:
            segment = (store.lookup_segment(result.segment_id)
                       if doc_class != "subject"
                       else subject_segments[int(result.segment_id.rsplit("/", 1)[1])])
            verdict = pipeline.run("pre_prompt",
                                   {"text": segment.text, "source": "retrieved"})
            injection = [f for f in verdict.findings if f.rule_id == "prompt_injection"]
            if injection:
                detail = {"segment_id": segment.segment_id,
                          "criterion_id": criterion.criterion_id,
                          "findings": [f.to_dict() for f in injection]}
                excluded.append(detail)
                store.audit.append("segment_excluded_injection", detail, actor="system")
                continue
            kept.append((result, segment))
        retrieved[doc_class] = kept

    if config.include_subject_in_retrieval and subject_index is not None:
        selected = retrieved.pop("subject", [])
        picked = sorted({s.ordinal for _, s in selected})
        subject_selection = [subject_segments[i] for i in picked]
    else:
        retrieved.pop("subject", None)
        subject_selection = list(subject_segments)

    reference = retrieved.get("reference_standard", [])
    examples = retrieved.get("evaluation_example", [])

    # Budget enforcement: shed lowest-similarity retrieved items first.
    total = _bundle_chars(criterion, role, subject_selection, reference, examples)
    if total > budget:
        pool = [("reference", i, r, s) for i, (r, s) in enumerate(reference)]
        pool += [("examples", i, r, s) for i, (r, s) in enumerate(examples)]
        pool.sort(key=lambda item: (item[2].similarity, item[3].segment_id))
        dropped: set[tuple[str, int]] = set()
        for kind, i, result, segment in pool:
            if total <= budget:
                break
            dropped.add((kind, i))
            total -= len(segment.text)
        reference = [pair for i, pair in enumerate(reference)
                     if ("reference", i) not in dropped]
        examples = [pair for i, pair in enumerate(examples)
                    if ("examples", i) not in dropped]

    while total > budget and subject_selection:
        last = subject_selection[-1]
        overshoot = total - budget
        if len(last.text) > overshoot:
            # Truncate the tail segment rather than dropping it entirely.
            trimmed = Segment(segment_id=last.segment_id,
                              section_path=last.section_path,
                              text=last.text[: len(last.text) - overshoot],
                              char_span=(last.char_span[0],
                                         last.char_span[1] - overshoot))
            subject_selection[-1] = trimmed
            total = budget
        else:
            subject_selection.pop()
            total -= len(last.text)

    return ContextBundle(
        criterion=criterion,
        role=role,
        subject_title=subject.document.title,
        subject_segments=subject_selection,
        reference=reference,
        examples=examples,
        total_chars=total,
        queries=queries,
        excluded_segments=excluded,
    )


def _claims_from_evidence(rows: list[dict]) -> tuple[AttributedClaim, ...]:
    claims = []
    for row in rows:
        text = row.get("claim") or row["quote"]
        claims.append(AttributedClaim(
            claim_text=text, evidence=((row["segment_id"], row["quote"]),)))
    return tuple(claims)


def evaluate_criterion(criterion: Criterion, role: RoleSpec, subject: ParsedDocument,
                       subject_segments: list[Segment], config: EvaluationConfig,
                       store: Store, provider: Provider,
                       pipeline: GuardrailPipeline | None = None,
                       transcript: list | None = None,
                       subject_index: VectorIndex | None = None) -> CriterionAssessment:
    """Full per-criterion pipeline: context, prompt, provider, parse, verify."""
    pipeline = pipeline or GuardrailPipeline()
    transcript = transcript if transcript is not None else []

    bundle = aggregate_context(criterion, role, subject, subject_segments, store,
                               config, provider, pipeline, subject_index)
    envelope = assemble_prompt(bundle, config.reasoning_strategy,
                               config.assessment_style, config.score_scale)

    prompt_verdict = pipeline.run(
        "pre_prompt", {"text": envelope.user_text, "source": "prompt"})
    if not prompt_verdict.passed:
        raise GuardrailBlocked(
            f"pre_prompt guardrail blocked criterion {criterion.criterion_id}: "
            + "; ".join(f.message for f in prompt_verdict.findings
                        if f.severity == "block"),
            findings=list(prompt_verdict.findings))

    strategy, style = config.reasoning_strategy, config.assessment_style
    call_log: list[dict] = []
    first = complete_and_parse(provider, envelope, strategy, style,
                               config.score_scale, call=1, transcript=call_log)

    if strategy == "after_scoring":
        verdict_value = first["score"] if style == "scored" else first["assessment_text"]
        second_envelope = build_second_call(envelope, verdict_value)
        second = complete_and_parse(provider, second_envelope, strategy, style,
                                    config.score_scale, call=2, transcript=call_log)
        score = first.get("score") if style == "scored" else None
        rationale = second["justification"]
        if style == "qualitative":
            rationale = first["assessment_text"] + "\n" + rationale
        evidence_rows = second["evidence"]
        steps = plan = None
    else:
        score = first.get("score") if style == "scored" else None
        evidence_rows = first["evidence"]
        steps = tuple(first["steps"]) if "steps" in first else None
        plan = tuple(first["plan"]) if "plan" in first else None
        if strategy == "before_scoring":
            rationale = first["rationale"]
        elif strategy == "chain_of_thought":
            rationale = "\n".join(first["steps"])
        else:
            rationale = first["analysis"]
        if style == "qualitative":
            rationale = rationale + "\n" + first["assessment_text"]

    raws = [entry["response"] for entry in call_log]
    assessment = CriterionAssessment(
        criterion_id=criterion.criterion_id,
        score=score,
        rationale=rationale,
        claims=_claims_from_evidence(evidence_rows),
        raw_model_output="\n".join(raws),
        queries_used=tuple(bundle.queries),
        steps=steps,
        plan=plan,
    )

    output_verdict = pipeline.run("post_output", {"assessment": assessment, "store": store})
    if not output_verdict.passed:
        blocked = [f for f in output_verdict.findings if f.severity == "block"]
        raise GuardrailBlocked(
            f"attribution guardrail rejected criterion {criterion.criterion_id}: "
            + "; ".join(f"{f.rule_id} ({f.message})" for f in blocked),
            findings=list(output_verdict.findings))

    transcript.extend(call_log)
    return assessment


def aggregate_scores(assessments, criteria, method: str,
                     score_scale: tuple[int, int]) -> float:
    """Weighted or simple average over per-criterion scores (exact arithmetic)."""
    scores = []
    for assessment in assessments:
        if assessment.score is None:
            raise MissingScore(f"assessment {assessment.criterion_id} has no score")
        scores.append(assessment.score)
    if method == "simple_average":
        result = Fraction(sum(scores), len(scores))
    else:
        weights = [Fraction(w) for w in effective_weights(criteria)]
        result = sum(w * s for w, s in zip(weights, scores))
    value = float(result)
    lo, hi = score_scale
    assert lo <= value <= hi, "aggregate must stay within the score scale"
    return value


def run_evaluation(subject_doc_id: str, config: EvaluationConfig, store: Store,
                   provider: Provider | None = None, run_id: str | None = None,
                   pipeline: GuardrailPipeline | None = None) -> EvaluationRun:
    """Evaluate every criterion of the configured evaluator against a subject.

    At most ``config.parallelism`` criterion evaluations run concurrently;
    assessments are assembled in criterion order either way. On per-criterion
    failures the run is stored with status ``failed`` and PartialFailure is
    raised naming each failing criterion.
    """
    subject_doc = store.get_document(subject_doc_id)
    subject_segments = store.load_segments(subject_doc_id)
    evaluator = store.load_evaluator(config.evaluator_id, config.evaluator_version)
    if not evaluator.criteria:
        raise ValueError("evaluator has no criteria")
    provider = provider or build_provider(config.provider)
    pipeline = pipeline or GuardrailPipeline()
    run_id = run_id or store.new_run_id()

    subject_parsed = store.get_parsed(subject_doc_id)
    subject_index = None
    if config.include_subject_in_retrieval:
        subject_index = VectorIndex(dim=store.embedding_dim)
        index_segments(subject_index, subject_segments, "subject",
                       embedder=store.embedder)

    started_at = _now()
    store.audit.append("run_started",
                       {"run_id": run_id, "subject_doc_id": subject_doc_id,
                        "config_digest": snapshot_config(config)}, actor="system")

    transcripts: dict[str, list] = {c.criterion_id: [] for c in evaluator.criteria}
    results: dict[str, CriterionAssessment] = {}
    errors: dict[str, str] = {}

    def _one(criterion: Criterion) -> CriterionAssessment:
        return evaluate_criterion(
            criterion, evaluator.role, subject_parsed, subject_segments, config,
            store, provider, pipeline, transcripts[criterion.criterion_id],
            subject_index)

    with ThreadPoolExecutor(max_workers=config.parallelism) as executor:
        futures = {c.criterion_id: executor.submit(_one, c) for c in evaluator.criteria}
        for criterion in evaluator.criteria:
            try:
                results[criterion.criterion_id] = futures[criterion.criterion_id].result()
            except Exception as exc:
                errors[criterion.criterion_id] = f"{type(exc).__name__}: {exc}"

    assessments = tuple(results[c.criterion_id] for c in evaluator.criteria
                        if c.criterion_id in results)
    transcript = [{"criterion_id": c.criterion_id, "calls": transcripts[c.criterion_id]}
                  for c in evaluator.criteria]
    transcript_ref = f"runs/{run_id}.transcript.json"

    if errors:
        run = EvaluationRun(
            run_id=run_id, config=config, config_digest=snapshot_config(config),
            subject_doc_id=subject_doc_id, assessments=assessments,
            overall_score=None, started_at=started_at, finished_at=_now(),
            provider_transcript_ref=transcript_ref, status="failed", errors=errors)
        store.save_run(run, transcript)
        store.audit.append("run_failed", {"run_id": run_id, "errors": errors},
                           actor="system")
        raise PartialFailure(
            f"run {run_id}: {len(errors)} criterion evaluation(s) failed", errors, run)

    overall = None
    if config.assessment_style == "scored":
        overall = aggregate_scores(assessments, evaluator.criteria,
                                   config.aggregation, config.score_scale)
    run = EvaluationRun(
        run_id=run_id, config=config, config_digest=snapshot_config(config),
        subject_doc_id=subject_doc_id, assessments=assessments,
        overall_score=overall, started_at=started_at, finished_at=_now(),
        provider_transcript_ref=transcript_ref, status="completed")
    store.save_run(run, transcript)
    store.audit.append("run_completed",
                       {"run_id": run_id, "overall_score": overall,
                        "run_digest": run.run_digest()}, actor="system")
    return run
