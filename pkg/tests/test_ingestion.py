"""Structural parsing and segmentation."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docueval.errors import UnknownSegment
from docueval.ingestion import (
    RawDocument,
    lookup_segment,
    normalize_ws,
    parse_structure,
    segment_document,
)


def doc(body: str, doc_class: str = "subject", title: str = "t") -> RawDocument:
    return RawDocument.create(doc_class=doc_class, title=title, body=body)


class TestParseStructure:
    def test_nested_headings_attach_to_nearest_shallower(self):
        parsed = parse_structure(doc("# A\n x\n## B\n y"))
        root = parsed.root
        assert len(root.children) == 1
        a = root.children[0]
        assert (a.heading, a.level) == ("A", 1)
        assert len(a.children) == 1
        b = a.children[0]
        assert (b.heading, b.level) == ("B", 2)

    def test_empty_document(self):
        parsed = parse_structure(doc(""))
        assert parsed.root.children == []
        assert parsed.root.span == (0, 0)
        assert parsed.sections == []

    def test_level_gap_still_attaches_as_child(self):
        parsed = parse_structure(doc("# A\n### C"))
        a = parsed.root.children[0]
        assert a.heading == "A"
        assert len(a.children) == 1
        assert a.children[0].heading == "C"
        assert a.children[0].level == 3

    def test_sibling_spans_disjoint_and_ordered(self):
        body = "# A\naaa\n# B\nbbb\n# C\nccc"
        parsed = parse_structure(doc(body))
        spans = [c.span for c in parsed.root.children]
        assert spans == sorted(spans)
        for (lo1, hi1), (lo2, hi2) in zip(spans, spans[1:]):
            assert hi1 <= lo2

    def test_child_levels_strictly_greater(self):
        parsed = parse_structure(doc("# A\n## B\n### C\n## D\n# E"))
        for node in parsed.root.walk():
            for child in node.children:
                assert child.level > node.level

    def test_hash_without_space_is_body_text(self):
        parsed = parse_structure(doc("#NoSpace\ntext"))
        assert parsed.root.children == []

    def test_setext_headings_are_body_text(self):
        parsed = parse_structure(doc("Title\n=====\ntext"))
        assert parsed.root.children == []

    def test_node_ids_are_ordinal_paths(self):
        parsed = parse_structure(doc("# A\n## B\n## C\n# D"))
        a, d = parsed.root.children
        assert a.node_id == "0.0"
        assert d.node_id == "0.1"
        assert [c.node_id for c in a.children] == ["0.0.0", "0.0.1"]

    def test_deterministic(self):
        body = "# A\nx\n## B\ny\n# C\nz"
        first = parse_structure(doc(body))
        second = parse_structure(doc(body))
        assert first.root.to_dict() == second.root.to_dict()


class TestSegmentDocument:
    def test_one_segment_per_small_leaf_section(self):
        body = "# A\nalpha text\n# B\nbeta text\n# C\ngamma text"
        parsed = parse_structure(doc(body))
        segments = segment_document(parsed, 400)
        assert len(segments) == 3
        assert [s.section_path for s in segments] == [("A",), ("B",), ("C",)]
        assert [s.segment_id for s in segments] == [
            f"{parsed.document.doc_id}/{i}" for i in range(3)]

    def test_oversized_section_splits_at_blank_lines(self):
        paragraphs = ["p1 " + "a" * 2997, "p2 " + "b" * 2997, "p3 " + "c" * 2997]
        body = "# Big\n" + "\n\n".join(paragraphs)
        parsed = parse_structure(doc(body))
        segments = segment_document(parsed, 4000)
        assert len(segments) == 3
        # Splits happen exactly at the two blank lines: each paragraph's text
        # lands whole in its own segment.
        for paragraph, segment in zip(paragraphs, segments):
            assert paragraph in segment.text
        spans = [s.char_span for s in segments]
        assert spans[0][1] == spans[1][0]
        assert spans[1][1] == spans[2][0]

    def test_empty_document_yields_no_segments(self):
        assert segment_document(parse_structure(doc("")), 400) == []

    def test_round_trip_on_fixture_bodies(self):
        from conftest import EXAMPLE_BODY, GUIDANCE_BODY, REFERENCE_BODY, SUBJECT_BODY
        for body in (SUBJECT_BODY, GUIDANCE_BODY, REFERENCE_BODY, EXAMPLE_BODY):
            parsed = parse_structure(doc(body))
            segments = segment_document(parsed, 400)
            assert normalize_ws("".join(s.text for s in segments)) == normalize_ws(body)

    def test_ordinals_dense_in_preorder(self):
        body = "intro\n# A\naaa\n## B\nbbb\n# C\nccc"
        parsed = parse_structure(doc(body))
        segments = segment_document(parsed, 400)
        assert [s.ordinal for s in segments] == list(range(len(segments)))
        starts = [s.char_span[0] for s in segments]
        assert starts == sorted(starts)

    def test_budget_below_minimum_rejected(self):
        with pytest.raises(ValueError):
            segment_document(parse_structure(doc("x")), 100)

    def test_single_huge_paragraph_splits_mid_paragraph(self):
        body = "word " * 300  # 1500 chars, no blank lines
        parsed = parse_structure(doc(body))
        segments = segment_document(parsed, 400)
        assert all(len(s.text) <= 400 for s in segments)
        assert normalize_ws("".join(s.text for s in segments)) == normalize_ws(body)

    @settings(max_examples=60, deadline=None)
    @given(st.text(alphabet="ab #\n", max_size=600),
           st.integers(min_value=200, max_value=500))
    def test_round_trip_property(self, body, budget):
        parsed = parse_structure(doc(body))
        segments = segment_document(parsed, budget)
        assert normalize_ws("".join(s.text for s in segments)) == normalize_ws(body)
        assert [s.ordinal for s in segments] == list(range(len(segments)))
        assert all(0 < len(s.text) <= budget for s in segments)

    def test_equal_inputs_yield_identical_outputs(self):
        body = "# A\n" + "text " * 50 + "\n## B\nmore"
        first = segment_document(parse_structure(doc(body)), 300)
        second = segment_document(parse_structure(doc(body)), 300)
        assert first == second


class TestLookupSegment:
    def test_existing_segment(self, corpus):
        store = corpus["store"]
        doc_id = corpus["subject"].doc_id
        segment = lookup_segment(store, f"{doc_id}/2")
        assert segment.segment_id == f"{doc_id}/2"

    def test_out_of_range(self, corpus):
        store = corpus["store"]
        doc_id = corpus["subject"].doc_id
        with pytest.raises(UnknownSegment):
            lookup_segment(store, f"{doc_id}/99")

    def test_malformed_id(self, corpus):
        with pytest.raises(UnknownSegment):
            lookup_segment(corpus["store"], "D1-2")

    def test_unknown_document(self, corpus):
        with pytest.raises(UnknownSegment):
            lookup_segment(corpus["store"], "dunknown/0")
