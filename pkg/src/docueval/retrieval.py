"""Semantic retrieval over reference standards and evaluation examples.

The reference embedder is a deterministic bag-of-tokens hashing embedder so
the whole pipeline is reproducible in tests; a model-backed embedder can be
plugged in through the same ``embed(text)`` contract. Search is an exact
scan — corpora are desk-scale and exactness lets tests compare against a
brute-force oracle.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .errors import DimensionMismatch
from .ingestion import DOC_CLASSES, Segment, lookup_segment

DEFAULT_DIM = 256

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

_MAGIC = b"DVEC"
_FORMAT_VERSION = 1


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _tokens(text: str) -> list[str]:
    out: list[str] = []
    current: list[str] = []
    for ch in text.lower():
        if ch.isalnum():
            current.append(ch)
        elif current:
            out.append("".join(current))
            current = []
    if current:
        out.append("".join(current))
    return out


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    norm: float

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "EmbeddingVector":
        return cls(values=tuple(float(v) for v in arr), norm=float(np.linalg.norm(arr)))

    @property
    def dim(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


def embed_text(text: str, dim: int = DEFAULT_DIM) -> EmbeddingVector:
    """Deterministic hashing embedder: token counts scattered by FNV-1a, L2-normalized.

    Empty or token-free text embeds to the zero vector (norm 0).
    """
    counts = np.zeros(dim, dtype=np.float64)
    for token in _tokens(text):
        counts[fnv1a64(token.encode("utf-8")) % dim] += 1.0
    norm = float(np.linalg.norm(counts))
    if norm > 0.0:
        counts /= norm
    return EmbeddingVector.from_array(counts)


Embedder = Callable[[str], EmbeddingVector]


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity, defined as 0 when either vector has zero norm."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimension {a.dim} != {b.dim}")
    if a.norm == 0.0 or b.norm == 0.0:
        return 0.0
    return float(np.dot(a.as_array(), b.as_array()) / (a.norm * b.norm))


@dataclass(frozen=True)
class VectorRecord:
    segment_id: str
    doc_class: str
    vector: EmbeddingVector


@dataclass(frozen=True)
class RetrievalResult:
    segment_id: str
    similarity: float
    rank: int


class VectorIndex:
    """Exact-scan vector index, upsert-by-segment-id."""

    def __init__(self, dim: int = DEFAULT_DIM):
        self.dim = dim
        self._records: dict[str, VectorRecord] = {}

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> list[VectorRecord]:
        return [self._records[k] for k in sorted(self._records)]

    def upsert(self, record: VectorRecord) -> None:
        if record.vector.dim != self.dim:
            raise DimensionMismatch(
                f"vector dimension {record.vector.dim} != index dimension {self.dim}")
        self._records[record.segment_id] = record

    def search(self, query: EmbeddingVector, k: int,
               class_filter: str | None = None) -> list[RetrievalResult]:
        return search_top_k(self, query, k, class_filter)

    # --- binary persistence ---------------------------------------------

    def dump_bytes(self) -> bytes:
        buf = io.BytesIO()
        buf.write(_MAGIC)
        buf.write(struct.pack("<HII", _FORMAT_VERSION, self.dim, len(self._records)))
        for record in self.records:
            cid = DOC_CLASSES.index(record.doc_class)
            sid = record.segment_id.encode("utf-8")
            buf.write(struct.pack("<BH", cid, len(sid)))
            buf.write(sid)
            buf.write(struct.pack(f"<{self.dim}d", *record.vector.values))
            buf.write(struct.pack("<d", record.vector.norm))
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "VectorIndex":
        buf = io.BytesIO(data)
        magic = buf.read(4)
        if magic != _MAGIC:
            raise ValueError(f"bad index magic {magic!r}")
        version, dim, count = struct.unpack("<HII", buf.read(10))
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported index format version {version}")
        index = cls(dim=dim)
        for _ in range(count):
            cid, sid_len = struct.unpack("<BH", buf.read(3))
            sid = buf.read(sid_len).decode("utf-8")
            values = struct.unpack(f"<{dim}d", buf.read(8 * dim))
            (norm,) = struct.unpack("<d", buf.read(8))
            index._records[sid] = VectorRecord(
                segment_id=sid, doc_class=DOC_CLASSES[cid],
                vector=EmbeddingVector(values=values, norm=norm))
        return index

    def to_json_export(self) -> dict:
        return {
            "format": "dvec-json",
            "schema_version": _FORMAT_VERSION,
            "dim": self.dim,
            "records": [
                {
                    "segment_id": r.segment_id,
                    "doc_class": r.doc_class,
                    "values": list(r.vector.values),
                    "norm": r.vector.norm,
                }
                for r in self.records
            ],
        }


def search_top_k(index: VectorIndex, query: EmbeddingVector, k: int,
                 class_filter: str | None = None) -> list[RetrievalResult]:
    """Exact top-k by cosine similarity; ties break on segment_id ascending."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if query.dim != index.dim:
        raise DimensionMismatch(f"query dimension {query.dim} != index dimension {index.dim}")

    scored = [
        (record.segment_id, cosine_similarity(query, record.vector))
        for record in index.records
        if class_filter is None or record.doc_class == class_filter
    ]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return [
        RetrievalResult(segment_id=sid, similarity=sim, rank=rank)
        for rank, (sid, sim) in enumerate(scored[:k], start=1)
    ]


def index_segments(index: VectorIndex, segments: Iterable[Segment], doc_class: str,
                   embedder: Embedder | None = None, store=None) -> int:
    """Embed and upsert segments; re-indexing replaces a segment's vector."""
    embed = embedder or (lambda text: embed_text(text, index.dim))
    count = 0
    for segment in segments:
        if store is not None:
            # Insert-time referential check: the id must resolve in the store.
            lookup_segment(store, segment.segment_id)
        index.upsert(VectorRecord(
            segment_id=segment.segment_id, doc_class=doc_class, vector=embed(segment.text)))
        count += 1
    return count
