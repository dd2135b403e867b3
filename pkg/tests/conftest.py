"""Shared fixtures: a temporary store preloaded with a small review corpus."""

from __future__ import annotations

import pytest

from docueval.criteria import Criterion, RoleSpec, create_evaluator
from docueval.persistence import Store
from docueval.runs import EvaluationConfig

SUBJECT_BODY = """# A Layered Architecture for Automated Document Assessment

This report proposes a layered architecture for assessing long technical
documents with language models. The design separates ingestion, retrieval,
and assessment so each layer can be tested in isolation.

## Motivation

Manual assessment of long submissions is slow and inconsistent between
assessors. Automated pipelines promise throughput but must remain auditable:
every judgement should trace back to concrete passages.

## Approach

The pipeline splits each submission into section-aligned chunks, retrieves
related material from a reference corpus, and asks a configured model to
judge one criterion at a time. Judgements carry citations that are checked
mechanically before acceptance.

## Findings

Across a pilot corpus of forty submissions the per-criterion agreement with
experienced assessors was encouraging, and every accepted judgement carried
at least one verifiable citation into the source text.

## Limitations

The pilot used a single reference corpus and one assessor pool; broader
validation is future work.
"""

GUIDANCE_BODY = """# Research Track Assessment Guidance

Assess each submission against the criteria below.

## Novelty

The submission advances the state of the art or offers a new perspective on
an established problem. Incremental work must argue its significance.

## Rigor

Claims are supported by sound methodology, careful analysis, and evidence
proportionate to their strength.

## Relevance

The work matters to practitioners and researchers in the field and fits the
track's scope.

## Verifiability and Transparency

Artifacts, data, and procedures are described in enough detail for others to
reproduce or audit the results.

## Presentation

The writing is clear and well organised; figures and tables support the
argument.
"""

REFERENCE_BODY = """# Formatting and Submission Standards

## Page Layout

Submissions use a two-column layout with ten-point type and conventional
margins. Papers exceeding the page limit are desk rejected.

## Citations

Reference lists follow the numeric style. Every claim that depends on prior
work carries a citation to it.

## Anonymisation

Author names and affiliations are removed for review. Self-citations are
worded in the third person.
"""

EXAMPLE_BODY = """# Example Assessment: Pilot Study on Retrieval Grounding

## Summary Judgement

The submission is competent and clearly written. The retrieval grounding
idea is useful, though the evaluation corpus is small.

## Strengths

Clear problem statement. The citation-checking mechanism is simple and
effective, and the ablation isolates its contribution.

## Weaknesses

The pilot corpus is narrow, and the comparison baselines are dated.
"""

THEORY_BODY = """# What Makes an Assessment Useful

## Grounding

A useful assessment quotes the passage it judges. Unattributed opinions are
hard to verify and harder to contest.

## Calibration

Scores carry meaning only against a stated scale; an assessment explains why
a submission sits where it does on that scale.

## Tone

Concrete, actionable observations help authors more than verdicts alone.
"""


@pytest.fixture()
def store(tmp_path):
    return Store(tmp_path / "store")


@pytest.fixture()
def corpus(store):
    """Store preloaded with subject, guidance, reference, example and theory docs."""
    subject, _, _ = store.add_document(doc_class="subject",
                                       title="A Layered Architecture for Automated "
                                             "Document Assessment",
                                       body=SUBJECT_BODY, source_filename="subject.md")
    guidance, _, _ = store.add_document(doc_class="criteria_guidance",
                                        title="Research Track Assessment Guidance",
                                        body=GUIDANCE_BODY, source_filename="guidance.md")
    reference, _, _ = store.add_document(doc_class="reference_standard",
                                         title="Formatting and Submission Standards",
                                         body=REFERENCE_BODY,
                                         source_filename="standards.md")
    example, _, _ = store.add_document(doc_class="evaluation_example",
                                       title="Example Assessment",
                                       body=EXAMPLE_BODY, source_filename="example.md")
    theory, _, _ = store.add_document(doc_class="reference_standard",
                                      title="What Makes an Assessment Useful",
                                      body=THEORY_BODY, source_filename="theory.md")
    return {
        "store": store,
        "subject": subject,
        "guidance": guidance,
        "reference": reference,
        "example": example,
        "theory": theory,
    }


def make_role(theory_doc_id: str | None = None) -> RoleSpec:
    sources = ()
    if theory_doc_id is not None:
        sources = ((theory_doc_id, (f"{theory_doc_id}/1",)),)
    return RoleSpec(
        role_name="Grounded Research Assessor",
        role_statement=("You assess submissions the way a careful senior reviewer "
                        "would: every judgement is grounded in a quoted passage, "
                        "calibrated against the stated scale, and phrased as a "
                        "concrete, actionable observation."),
        theory_sources=sources,
    )


def make_criteria(names=("Novelty", "Rigor", "Relevance")) -> list[Criterion]:
    return [Criterion.create(name, description=f"How the submission fares on {name.lower()}.")
            for name in names]


@pytest.fixture()
def evaluator(corpus):
    profile = create_evaluator(make_role(corpus["theory"].doc_id),
                               make_criteria(("Novelty", "Rigor", "Relevance",
                                              "Verifiability and Transparency",
                                              "Presentation")))
    corpus["store"].save_evaluator(profile)
    return profile


def make_config(evaluator_profile, **overrides) -> EvaluationConfig:
    defaults = dict(
        evaluator_id=evaluator_profile.evaluator_id,
        evaluator_version=evaluator_profile.version,
        reasoning_strategy="before_scoring",
        assessment_style="scored",
        provider={"name": "stub", "params": {"seed": 7}},
        parallelism=2,
    )
    defaults.update(overrides)
    return EvaluationConfig(**defaults)
