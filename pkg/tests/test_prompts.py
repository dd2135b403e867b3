"""Prompt templates, response schemas, strict parsing and the repair loop."""

from __future__ import annotations

import json

import pytest

from docueval.criteria import Criterion, RoleSpec
from docueval.engine import ContextBundle
from docueval.errors import MalformedOutput, ScoreOutOfRange
from docueval.ingestion import Segment
from docueval.prompts import (
    assemble_prompt,
    build_second_call,
    complete_and_parse,
    parse_model_output,
)
from docueval.providers import Provider, StubProvider, first_cited_segment
from docueval.runs import ASSESSMENT_STYLES, REASONING_STRATEGIES


def bundle():
    criterion = Criterion.create("Novelty", description="Advances the field.")
    role = RoleSpec(role_name="Assessor", role_statement="Judge with cited evidence.")
    segments = [
        Segment(segment_id="dsub/0", section_path=(), text="The design separates "
                "ingestion, retrieval, and assessment layers.", char_span=(0, 60)),
        Segment(segment_id="dsub/1", section_path=("Approach",),
                text="Judgements carry citations checked mechanically.",
                char_span=(60, 110)),
    ]
    return ContextBundle(criterion=criterion, role=role, subject_title="Layered Design",
                         subject_segments=segments, reference=[], examples=[],
                         total_chars=sum(len(s.text) for s in segments))


class TestAssemblePrompt:
    def test_before_scoring_lists_rationale_before_score(self):
        envelope = assemble_prompt(bundle(), "before_scoring", "scored", (1, 5))
        instruction = envelope.schema.instruction()
        assert instruction.index('"rationale"') < instruction.index('"score"')

    def test_after_scoring_marked_two_call_with_score_only_schema(self):
        envelope = assemble_prompt(bundle(), "after_scoring", "scored", (1, 5))
        assert envelope.two_call
        assert list(envelope.schema.fields) == ["score"]

    def test_qualitative_prompt_contains_no_scale(self):
        envelope = assemble_prompt(bundle(), "before_scoring", "qualitative", (1, 5))
        text = envelope.system_text + envelope.user_text + envelope.schema.instruction()
        assert "between 1 and 5" not in text
        assert '"score"' not in text
        assert envelope.score_scale is None

    def test_deterministic_per_strategy_and_style(self):
        for strategy in REASONING_STRATEGIES:
            for style in ASSESSMENT_STYLES:
                first = assemble_prompt(bundle(), strategy, style, (1, 5))
                second = assemble_prompt(bundle(), strategy, style, (1, 5))
                assert first == second

    def test_bundle_rendered_in_fixed_order(self):
        envelope = assemble_prompt(bundle(), "chain_of_thought", "scored", (1, 5))
        text = envelope.user_text
        assert (text.index("### CRITERION") < text.index("### REVIEWER ROLE")
                < text.index("### SUBJECT DOCUMENT") < text.index("### REFERENCE MATERIAL")
                < text.index("### EVALUATION EXAMPLES"))

    def test_segment_markers_present(self):
        envelope = assemble_prompt(bundle(), "before_scoring", "scored", (1, 5))
        assert "[seg:dsub/0]" in envelope.user_text
        marker = first_cited_segment(envelope.user_text)
        assert marker is not None
        assert marker[0] == "dsub/0"

    def test_second_call_embeds_committed_score(self):
        envelope = assemble_prompt(bundle(), "after_scoring", "scored", (1, 5))
        second = build_second_call(envelope, 4)
        assert "score 4" in second.user_text
        assert set(second.schema.fields) == {"justification", "evidence"}


class TestParseModelOutput:
    def test_valid_before_scoring_payload(self):
        raw = json.dumps({"rationale": "solid work", "evidence": [], "score": 4})
        parsed = parse_model_output(raw, "before_scoring", "scored", (1, 5))
        assert parsed["score"] == 4
        assert parsed["rationale"] == "solid work"

    def test_score_out_of_range(self):
        raw = json.dumps({"rationale": "x", "evidence": [], "score": 9})
        with pytest.raises(ScoreOutOfRange):
            parse_model_output(raw, "before_scoring", "scored", (1, 5))

    def test_non_json_is_malformed(self):
        with pytest.raises(MalformedOutput):
            parse_model_output("score: four", "before_scoring", "scored", (1, 5))

    def test_missing_key_is_malformed(self):
        raw = json.dumps({"rationale": "x", "score": 3})
        with pytest.raises(MalformedOutput):
            parse_model_output(raw, "before_scoring", "scored", (1, 5))

    def test_boolean_score_is_malformed(self):
        raw = json.dumps({"rationale": "x", "evidence": [], "score": True})
        with pytest.raises(MalformedOutput):
            parse_model_output(raw, "before_scoring", "scored", (1, 5))

    def test_evidence_rows_validated(self):
        raw = json.dumps({"rationale": "x", "evidence": [{"segment_id": 1}], "score": 3})
        with pytest.raises(MalformedOutput):
            parse_model_output(raw, "before_scoring", "scored", (1, 5))

    def test_chain_of_thought_steps(self):
        raw = json.dumps({"steps": ["a", "b"], "evidence": [], "score": 2})
        parsed = parse_model_output(raw, "chain_of_thought", "scored", (1, 5))
        assert parsed["steps"] == ["a", "b"]

    def test_deep_reasoning_plan_and_analysis(self):
        raw = json.dumps({"plan": ["p1"], "analysis": "deep", "evidence": [], "score": 5})
        parsed = parse_model_output(raw, "deep_reasoning_planning", "scored", (1, 5))
        assert parsed["plan"] == ["p1"]
        assert parsed["analysis"] == "deep"

    def test_qualitative_assessment_text(self):
        raw = json.dumps({"rationale": "x", "evidence": [], "assessment_text": "narrative"})
        parsed = parse_model_output(raw, "before_scoring", "qualitative", (1, 5))
        assert parsed["assessment_text"] == "narrative"
        assert "score" not in parsed


class BrokenProvider(Provider):
    """Returns junk a fixed number of times, then optionally valid output."""

    def __init__(self, junk_count: int, valid: str = ""):
        self.junk_count = junk_count
        self.valid = valid
        self.calls = 0

    def complete(self, envelope):
        self.calls += 1
        if self.calls <= self.junk_count:
            return "not json at all"
        return self.valid


class TestRepairLoop:
    def test_single_failure_repaired(self):
        valid = json.dumps({"rationale": "ok", "evidence": [], "score": 3})
        provider = BrokenProvider(1, valid)
        envelope = assemble_prompt(bundle(), "before_scoring", "scored", (1, 5))
        transcript = []
        parsed = complete_and_parse(provider, envelope, "before_scoring", "scored",
                                    (1, 5), transcript=transcript)
        assert parsed["score"] == 3
        assert provider.calls == 2
        assert [t["repaired"] for t in transcript] == [False, True]
        assert "could not be parsed" in transcript[1]["user_text"]

    def test_two_failures_are_final(self):
        provider = BrokenProvider(2)
        envelope = assemble_prompt(bundle(), "before_scoring", "scored", (1, 5))
        with pytest.raises(MalformedOutput):
            complete_and_parse(provider, envelope, "before_scoring", "scored", (1, 5))
        assert provider.calls == 2

    def test_out_of_range_score_not_repaired(self):
        raw = json.dumps({"rationale": "x", "evidence": [], "score": 11})
        provider = BrokenProvider(0, raw)
        envelope = assemble_prompt(bundle(), "before_scoring", "scored", (1, 5))
        with pytest.raises(ScoreOutOfRange):
            complete_and_parse(provider, envelope, "before_scoring", "scored", (1, 5))
        assert provider.calls == 1


class TestStubProvider:
    def test_deterministic_across_instances(self):
        envelope = assemble_prompt(bundle(), "before_scoring", "scored", (1, 5))
        assert StubProvider(seed=5).complete(envelope) == \
               StubProvider(seed=5).complete(envelope)

    def test_seed_changes_output(self):
        envelope = assemble_prompt(bundle(), "before_scoring", "scored", (1, 5))
        assert StubProvider(seed=1).complete(envelope) != \
               StubProvider(seed=2).complete(envelope)

    def test_output_is_schema_valid_for_all_strategies(self):
        for strategy in REASONING_STRATEGIES:
            for style in ASSESSMENT_STYLES:
                envelope = assemble_prompt(bundle(), strategy, style, (1, 5))
                raw = StubProvider(seed=3).complete(envelope)
                parsed = parse_model_output(raw, strategy, style, (1, 5))
                assert parsed is not None

    def test_cites_first_subject_segment(self):
        envelope = assemble_prompt(bundle(), "before_scoring", "scored", (1, 5))
        payload = json.loads(StubProvider(seed=3).complete(envelope))
        assert payload["evidence"][0]["segment_id"] == "dsub/0"
        quote = payload["evidence"][0]["quote"]
        assert quote in "The design separates ingestion, retrieval, and assessment layers."

    def test_score_within_scale(self):
        for seed in range(10):
            envelope = assemble_prompt(bundle(), "before_scoring", "scored", (2, 4))
            payload = json.loads(StubProvider(seed=seed).complete(envelope))
            assert 2 <= payload["score"] <= 4
