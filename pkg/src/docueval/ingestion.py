"""Document ingestion: structural parsing and segmentation.

Uploaded documents (markdown or plain text) are parsed into a section tree
keyed on ATX headings, then segmented into citable chunks. Segments are the
unit of source attribution: every claim an evaluator makes must cite a
segment id and quote its text.

Both :func:`parse_structure` and :func:`segment_document` are pure; equal
inputs yield byte-identical outputs.
"""

from __future__ import annotations

import re
import subprocess
from dataclasses import dataclass, field
from typing import Protocol

from .canonical import sha256_hex
from .errors import InvalidEncoding, UnknownDocument, UnknownSegment

DOC_CLASSES = ("subject", "criteria_guidance", "evaluation_example", "reference_standard")

DEFAULT_MAX_SEGMENT_CHARS = 4000
MIN_SEGMENT_BUDGET = 200

_ATX_RE = re.compile(r"^(#{1,6})(?:[ \t]+(.*))?$")
_SEGMENT_ID_RE = re.compile(r"^(?P<doc>.+)/(?P<n>\d+)$")


def normalize_ws(text: str) -> str:
    """Collapse whitespace runs to single spaces and trim."""
    return " ".join(text.split())


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    doc_class: str
    title: str
    body: str
    source_filename: str
    content_digest: str

    def __post_init__(self):
        if self.doc_class not in DOC_CLASSES:
            raise ValueError(f"unknown doc_class {self.doc_class!r}")

    @classmethod
    def create(cls, *, doc_class: str, title: str, body: str,
               source_filename: str = "", doc_id: str | None = None) -> "RawDocument":
        digest = sha256_hex(body)
        if doc_id is None:
            # Digest-derived ids make re-uploads of identical content idempotent.
            doc_id = "d" + digest[:12]
        return cls(doc_id=doc_id, doc_class=doc_class, title=title, body=body,
                   source_filename=source_filename, content_digest=digest)

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "doc_class": self.doc_class,
            "title": self.title,
            "source_filename": self.source_filename,
            "content_digest": self.content_digest,
        }


@dataclass
class SectionNode:
    node_id: str
    heading: str
    level: int
    span: tuple[int, int]
    children: list["SectionNode"] = field(default_factory=list)

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "heading": self.heading,
            "level": self.level,
            "span": list(self.span),
            "children": [c.to_dict() for c in self.children],
        }


@dataclass(frozen=True)
class Segment:
    segment_id: str
    section_path: tuple[str, ...]
    text: str
    char_span: tuple[int, int]

    @property
    def doc_id(self) -> str:
        return self.segment_id.rsplit("/", 1)[0]

    @property
    def ordinal(self) -> int:
        return int(self.segment_id.rsplit("/", 1)[1])

    def to_dict(self) -> dict:
        return {
            "segment_id": self.segment_id,
            "section_path": list(self.section_path),
            "text": self.text,
            "char_span": list(self.char_span),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Segment":
        return cls(
            segment_id=d["segment_id"],
            section_path=tuple(d["section_path"]),
            text=d["text"],
            char_span=tuple(d["char_span"]),
        )


@dataclass
class ParsedDocument:
    document: RawDocument
    root: SectionNode

    @property
    def sections(self) -> list[SectionNode]:
        return [n for n in self.root.walk() if n.level > 0]


def parse_structure(doc: RawDocument) -> ParsedDocument:
    """Build the section tree from ATX headings.

    A heading attaches as child of the nearest preceding node with strictly
    smaller level; non-heading text belongs to the most recent node. Setext
    and HTML headings are deliberately treated as body text.
    """
    body = doc.body
    if not isinstance(body, str):
        raise InvalidEncoding(f"document {doc.doc_id} body is not text")

    root = SectionNode(node_id="0", heading="", level=0, span=(0, len(body)))
    stack = [root]

    offset = 0
    for line in body.splitlines(keepends=True):
        stripped = line.rstrip("\r\n")
        m = _ATX_RE.match(stripped)
        if m:
            level = len(m.group(1))
            heading = re.sub(r"\s+#+\s*$", "", (m.group(2) or "").strip())
            while stack[-1].level >= level:
                closed = stack.pop()
                closed.span = (closed.span[0], offset)
            parent = stack[-1]
            node = SectionNode(
                node_id=f"{parent.node_id}.{len(parent.children)}",
                heading=heading,
                level=level,
                span=(offset, len(body)),
            )
            parent.children.append(node)
            stack.append(node)
        offset += len(line)

    for node in stack[1:]:
        node.span = (node.span[0], len(body))
    return ParsedDocument(document=doc, root=root)


def _own_text_blocks(parsed: ParsedDocument) -> list[tuple[SectionNode, int, int]]:
    """Pre-order (node, start, end) spans of each node's own text.

    A node's own text runs from its heading line to its first child heading;
    together the blocks partition the body exactly, which is what makes the
    whitespace-normalized round-trip invariant hold.
    """
    blocks = []
    for node in parsed.root.walk():
        start = node.span[0]
        end = node.children[0].span[0] if node.children else node.span[1]
        if end > start:
            blocks.append((node, start, end))
    return blocks


def _paragraph_split_points(text: str) -> list[int]:
    """Offsets (relative to ``text``) where a new paragraph begins."""
    return [m.end() for m in re.finditer(r"\n[ \t]*\n", text)]


def _split_block(text: str, start: int, budget: int) -> list[tuple[int, int]]:
    """Split one oversized block into spans of at most ``budget`` chars.

    Splits at paragraph boundaries (blank lines) first, mid-paragraph only
    as a last resort. Returned spans are absolute and partition the block.
    """
    if len(text) <= budget:
        return [(start, start + len(text))]

    points = _paragraph_split_points(text)
    pieces: list[tuple[int, int]] = []
    cursor = 0
    boundaries = points + [len(text)]
    piece_start = 0
    for boundary in boundaries:
        if boundary - piece_start > budget and cursor > piece_start:
            pieces.append((piece_start, cursor))
            piece_start = cursor
        cursor = boundary
    if cursor > piece_start:
        pieces.append((piece_start, cursor))

    # Last resort: any piece still over budget is cut at whitespace, else hard.
    final: list[tuple[int, int]] = []
    for lo, hi in pieces:
        while hi - lo > budget:
            window = text[lo:lo + budget]
            ws = max(window.rfind(" "), window.rfind("\n"), window.rfind("\t"))
            cut = lo + (ws + 1 if ws > 0 else budget)
            final.append((lo, cut))
            lo = cut
        final.append((lo, hi))

    return [(start + lo, start + hi) for lo, hi in final]


def segment_document(parsed: ParsedDocument,
                     max_segment_chars: int = DEFAULT_MAX_SEGMENT_CHARS) -> list[Segment]:
    """Segment a parsed document into dense, citable chunks.

    One segment per leaf section that fits the budget; oversized sections are
    split at paragraph boundaries. Ordinals follow pre-order document order.
    """
    if max_segment_chars < MIN_SEGMENT_BUDGET:
        raise ValueError(f"max_segment_chars must be >= {MIN_SEGMENT_BUDGET}")

    body = parsed.document.body
    doc_id = parsed.document.doc_id
    segments: list[Segment] = []
    for node, start, end in _own_text_blocks(parsed):
        path = _section_path(parsed, node)
        for lo, hi in _split_block(body[start:end], start, max_segment_chars):
            segments.append(Segment(
                segment_id=f"{doc_id}/{len(segments)}",
                section_path=path,
                text=body[lo:hi],
                char_span=(lo, hi),
            ))
    return segments


def _section_path(parsed: ParsedDocument, node: SectionNode) -> tuple[str, ...]:
    if node.level == 0:
        return ()
    path: list[str] = []
    cursor = parsed.root
    ids = node.node_id.split(".")
    for index in ids[1:]:
        cursor = cursor.children[int(index)]
        path.append(cursor.heading)
    return tuple(path)


def parse_segment_id(segment_id: str) -> tuple[str, int]:
    """Strictly parse ``<doc_id>/<n>``; malformed ids never partially resolve."""
    m = _SEGMENT_ID_RE.match(segment_id)
    if not m:
        raise UnknownSegment(f"malformed segment id {segment_id!r}")
    return m.group("doc"), int(m.group("n"))


def lookup_segment(store, segment_id: str) -> Segment:
    """Resolve a segment id against a store; raises UnknownSegment, never fabricates."""
    doc_id, ordinal = parse_segment_id(segment_id)
    try:
        segments = store.load_segments(doc_id)
    except UnknownDocument as exc:
        raise UnknownSegment(f"segment {segment_id!r} does not resolve") from exc
    if ordinal >= len(segments):
        raise UnknownSegment(f"segment {segment_id!r} out of range")
    return segments[ordinal]


class DocumentConverter(Protocol):
    """Plug-in point for format converters (e.g. an external OCR service).

    Implementations turn raw upload bytes into markdown; the pipeline itself
    only ever consumes markdown or plain text.
    """

    def convert(self, filename: str, data: bytes) -> str: ...


class CommandConverter:
    """Converter that pipes upload bytes through an external command."""

    def __init__(self, argv: list[str], timeout: float = 60.0):
        self.argv = argv
        self.timeout = timeout

    def convert(self, filename: str, data: bytes) -> str:
        result = subprocess.run(
            self.argv, input=data, capture_output=True, timeout=self.timeout, check=True,
        )
        try:
            return result.stdout.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InvalidEncoding(f"converter output for {filename} is not UTF-8") from exc


def decode_upload(filename: str, data: bytes) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InvalidEncoding(f"{filename} is not valid UTF-8") from exc
