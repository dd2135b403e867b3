"""File-backed multi-store: documents, segments, evaluators, vectors, runs,
sessions, audit and feedback logs.

One directory per data kind under a single root. Evaluator version files and
run files are write-once; every stored record carries a content digest so
loads detect corruption. The store is the only component that touches disk —
everything above it works with in-memory objects.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .audit import AuditLog
from .canonical import canonical_json, digest_of, sha256_hex
from .criteria import EvaluatorProfile
from .errors import (
    CorruptRecord,
    UnknownDocument,
    UnknownEvaluator,
    UnknownRun,
    UnknownSegment,
    UnknownSession,
    WriteOnceViolation,
)
from .ingestion import (
    DEFAULT_MAX_SEGMENT_CHARS,
    ParsedDocument,
    RawDocument,
    Segment,
    parse_segment_id,
    parse_structure,
    segment_document,
)
from .retrieval import DEFAULT_DIM, VectorIndex, embed_text, index_segments
from .runs import EvaluationConfig, EvaluationRun

SCHEMA_VERSION = 1

RETRIEVAL_CLASSES = ("reference_standard", "evaluation_example")


def snapshot_config(config: EvaluationConfig) -> str:
    """Content digest of the canonical serialization of a run configuration."""
    return digest_of(config.to_dict())


def _write_json(path: Path, payload: dict) -> None:
    record = dict(payload)
    record["record_digest"] = digest_of(payload)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(record) + "\n", encoding="utf-8")


def _read_json(path: Path, what: str) -> dict:
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
        stored = record.pop("record_digest")
    except (ValueError, KeyError) as exc:
        raise CorruptRecord(f"{what} at {path.name} is unreadable: {exc}") from exc
    if digest_of(record) != stored:
        raise CorruptRecord(f"{what} at {path.name} fails its digest check")
    return record


class Store:
    """Root-directory store. Concurrent readers; writes serialized per kind."""

    def __init__(self, root: str | Path, embedding_dim: int = DEFAULT_DIM):
        self.root = Path(root)
        for sub in ("documents", "segments", "evaluators", "vectors", "runs", "sessions"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self.audit = AuditLog(self.root / "audit.log")
        self._write_lock = threading.Lock()
        self._feedback_lock = threading.Lock()
        meta_path = self.root / "meta.json"
        if meta_path.exists():
            self.embedding_dim = json.loads(meta_path.read_text())["embedding_dim"]
        else:
            self.embedding_dim = embedding_dim
            meta_path.write_text(canonical_json(
                {"schema_version": SCHEMA_VERSION, "embedding_dim": embedding_dim}) + "\n")
        self.embedder = lambda text: embed_text(text, self.embedding_dim)

    # --- documents --------------------------------------------------------

    def add_document(self, *, doc_class: str, title: str, body: str,
                     source_filename: str = "",
                     max_segment_chars: int = DEFAULT_MAX_SEGMENT_CHARS,
                     actor: str = "user") -> tuple[RawDocument, list[Segment], bool]:
        """Parse, segment and persist a document.

        Returns (document, segments, created). Re-uploading content with an
        already-seen digest returns the existing document unchanged.
        """
        doc = RawDocument.create(doc_class=doc_class, title=title, body=body,
                                 source_filename=source_filename)
        with self._write_lock:
            manifest_path = self._manifest_path(doc.doc_id)
            if manifest_path.exists():
                return self.get_document(doc.doc_id), self.load_segments(doc.doc_id), False
            parsed = parse_structure(doc)
            segments = segment_document(parsed, max_segment_chars)
            (self.root / "documents" / f"{doc.doc_id}.raw").write_bytes(
                body.encode("utf-8"))
            _write_json(manifest_path, {
                "schema_version": SCHEMA_VERSION,
                **doc.to_dict(),
                "max_segment_chars": max_segment_chars,
                "segment_index": [
                    {"segment_id": s.segment_id, "section_path": list(s.section_path),
                     "char_span": list(s.char_span)}
                    for s in segments
                ],
            })
            _write_json(self.root / "segments" / f"{doc.doc_id}.json", {
                "schema_version": SCHEMA_VERSION,
                "doc_id": doc.doc_id,
                "segments": [s.to_dict() for s in segments],
            })
            if doc.doc_class in RETRIEVAL_CLASSES:
                index = self.load_index(doc.doc_class)
                index_segments(index, segments, doc.doc_class, embedder=self.embedder)
                self._save_index(doc.doc_class, index)
        self.audit.append("document_ingested",
                          {"doc_id": doc.doc_id, "doc_class": doc.doc_class,
                           "digest": doc.content_digest, "segments": len(segments)},
                          actor=actor)
        return doc, segments, True

    def _manifest_path(self, doc_id: str) -> Path:
        return self.root / "documents" / f"{doc_id}.manifest.json"

    def get_document(self, doc_id: str) -> RawDocument:
        path = self._manifest_path(doc_id)
        if not path.exists():
            raise UnknownDocument(f"document {doc_id!r} not in store")
        manifest = _read_json(path, "document manifest")
        body = (self.root / "documents" / f"{doc_id}.raw").read_text(encoding="utf-8")
        return RawDocument(doc_id=manifest["doc_id"], doc_class=manifest["doc_class"],
                           title=manifest["title"], body=body,
                           source_filename=manifest["source_filename"],
                           content_digest=manifest["content_digest"])

    def get_manifest(self, doc_id: str) -> dict:
        path = self._manifest_path(doc_id)
        if not path.exists():
            raise UnknownDocument(f"document {doc_id!r} not in store")
        return _read_json(path, "document manifest")

    def get_parsed(self, doc_id: str) -> ParsedDocument:
        return parse_structure(self.get_document(doc_id))

    def load_segments(self, doc_id: str) -> list[Segment]:
        path = self.root / "segments" / f"{doc_id}.json"
        if not path.exists():
            raise UnknownDocument(f"segments for {doc_id!r} not in store")
        data = _read_json(path, "segment file")
        return [Segment.from_dict(d) for d in data["segments"]]

    def lookup_segment(self, segment_id: str) -> Segment:
        doc_id, ordinal = parse_segment_id(segment_id)
        try:
            segments = self.load_segments(doc_id)
        except UnknownDocument as exc:
            raise UnknownSegment(f"segment {segment_id!r} does not resolve") from exc
        if ordinal >= len(segments):
            raise UnknownSegment(f"segment {segment_id!r} out of range")
        return segments[ordinal]

    def list_documents(self, doc_class: str | None = None) -> list[dict]:
        out = []
        for path in sorted((self.root / "documents").glob("*.manifest.json")):
            manifest = _read_json(path, "document manifest")
            if doc_class is None or manifest["doc_class"] == doc_class:
                out.append(manifest)
        return out

    # --- evaluators ---------------------------------------------------------

    def _evaluator_path(self, evaluator_id: str, version: int) -> Path:
        return self.root / "evaluators" / f"{evaluator_id}@{version}.json"

    def save_evaluator(self, profile: EvaluatorProfile, actor: str = "user") -> None:
        with self._write_lock:
            path = self._evaluator_path(profile.evaluator_id, profile.version)
            if path.exists():
                raise WriteOnceViolation(
                    f"evaluator version {profile.evaluator_id}@{profile.version} "
                    "already exists")
            _write_json(path, profile.to_dict())
        self.audit.append("evaluator_saved",
                          {"evaluator_id": profile.evaluator_id,
                           "version": profile.version, "digest": profile.digest()},
                          actor=actor)

    def load_evaluator(self, evaluator_id: str,
                       version: int | None = None) -> EvaluatorProfile:
        if version is None:
            version = self.latest_evaluator_version(evaluator_id)
        path = self._evaluator_path(evaluator_id, version)
        if not path.exists():
            raise UnknownEvaluator(f"evaluator {evaluator_id}@{version} not in store")
        return EvaluatorProfile.from_dict(_read_json(path, "evaluator profile"))

    def latest_evaluator_version(self, evaluator_id: str) -> int:
        versions = [
            int(path.stem.rsplit("@", 1)[1])
            for path in (self.root / "evaluators").glob(f"{evaluator_id}@*.json")
        ]
        if not versions:
            raise UnknownEvaluator(f"evaluator {evaluator_id!r} not in store")
        return max(versions)

    def list_evaluators(self) -> list[dict]:
        latest: dict[str, int] = {}
        for path in (self.root / "evaluators").glob("*@*.json"):
            evaluator_id, version = path.stem.rsplit("@", 1)
            latest[evaluator_id] = max(latest.get(evaluator_id, 0), int(version))
        out = []
        for evaluator_id in sorted(latest):
            profile = self.load_evaluator(evaluator_id, latest[evaluator_id])
            out.append({
                "evaluator_id": evaluator_id,
                "latest_version": profile.version,
                "role_name": profile.role.role_name,
                "criteria_count": len(profile.criteria),
                "parent": list(profile.parent) if profile.parent else None,
            })
        return out

    # --- vector indexes -----------------------------------------------------

    def _index_path(self, doc_class: str) -> Path:
        return self.root / "vectors" / f"{doc_class}.dvec"

    def load_index(self, doc_class: str) -> VectorIndex:
        path = self._index_path(doc_class)
        if path.exists():
            return VectorIndex.from_bytes(path.read_bytes())
        return VectorIndex(dim=self.embedding_dim)

    def _save_index(self, doc_class: str, index: VectorIndex) -> None:
        self._index_path(doc_class).write_bytes(index.dump_bytes())

    def export_index_json(self, doc_class: str) -> dict:
        return self.load_index(doc_class).to_json_export()

    # --- runs ---------------------------------------------------------------

    def new_run_id(self) -> str:
        return "run-" + uuid.uuid4().hex[:12]

    def save_run(self, run: EvaluationRun, transcript: list | dict,
                 actor: str = "system") -> None:
        with self._write_lock:
            path = self.root / "runs" / f"{run.run_id}.json"
            if path.exists():
                raise WriteOnceViolation(f"run {run.run_id} already exists")
            transcript_path = self.root / "runs" / f"{run.run_id}.transcript.json"
            transcript_path.write_text(
                canonical_json({"schema_version": SCHEMA_VERSION,
                                "run_id": run.run_id, "transcript": transcript}) + "\n",
                encoding="utf-8")
            _write_json(path, run.to_dict())
        self.audit.append("run_saved",
                          {"run_id": run.run_id, "status": run.status,
                           "run_digest": run.run_digest()}, actor=actor)

    def load_run(self, run_id: str) -> EvaluationRun:
        path = self.root / "runs" / f"{run_id}.json"
        if not path.exists():
            raise UnknownRun(f"run {run_id!r} not in store")
        data = _read_json(path, "run record")
        data.pop("run_digest", None)
        return EvaluationRun.from_dict(data)

    def run_exists(self, run_id: str) -> bool:
        return (self.root / "runs" / f"{run_id}.json").exists()

    def load_transcript(self, run_id: str):
        path = self.root / "runs" / f"{run_id}.transcript.json"
        if not path.exists():
            raise UnknownRun(f"transcript for run {run_id!r} not in store")
        return json.loads(path.read_text(encoding="utf-8"))["transcript"]

    def list_runs(self, subject_doc_id: str | None = None,
                  evaluator_id: str | None = None) -> list[dict]:
        """Run summaries, newest first."""
        summaries = []
        for path in (self.root / "runs").glob("run-*.json"):
            if path.name.endswith(".transcript.json"):
                continue
            data = _read_json(path, "run record")
            if subject_doc_id is not None and data["subject_doc_id"] != subject_doc_id:
                continue
            if evaluator_id is not None and data["config"]["evaluator_id"] != evaluator_id:
                continue
            summaries.append({
                "run_id": data["run_id"],
                "subject_doc_id": data["subject_doc_id"],
                "evaluator_id": data["config"]["evaluator_id"],
                "evaluator_version": data["config"]["evaluator_version"],
                "config_digest": data["config_digest"],
                "overall_score": data["overall_score"],
                "status": data["status"],
                "started_at": data["started_at"],
                "finished_at": data["finished_at"],
            })
        summaries.sort(key=lambda s: (s["started_at"], s["run_id"]), reverse=True)
        return summaries

    # --- sessions -----------------------------------------------------------

    def save_session(self, session_dict: dict) -> None:
        with self._write_lock:
            _write_json(self.root / "sessions" / f"{session_dict['session_id']}.json",
                        session_dict)

    def load_session_dict(self, session_id: str) -> dict:
        path = self.root / "sessions" / f"{session_id}.json"
        if not path.exists():
            raise UnknownSession(f"session {session_id!r} not in store")
        return _read_json(path, "session record")

    def list_sessions(self) -> list[dict]:
        out = []
        for path in sorted((self.root / "sessions").glob("*.json")):
            out.append(_read_json(path, "session record"))
        return out

    # --- feedback -----------------------------------------------------------

    def append_feedback(self, entry: dict) -> None:
        with self._feedback_lock:
            with (self.root / "feedback.log").open("a", encoding="utf-8") as fh:
                fh.write(canonical_json({"schema_version": SCHEMA_VERSION, **entry}) + "\n")

    def read_feedback(self) -> list[dict]:
        path = self.root / "feedback.log"
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()
                if line.strip()]


@dataclass
class IntegrityReport:
    violations: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind: str, message: str, **extra) -> None:
        self.violations.append({"kind": kind, "message": message, **extra})

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": self.violations}


def verify_store(root: str | Path) -> IntegrityReport:
    """Cross-reference and chain verification over a store root.

    Checks runs → evaluator versions, claims → segments, sessions → runs and
    documents, evaluator references → segments, record digests, and the
    audit hash chain. Report-based; never raises for content problems.
    """
    store = Store(root)
    report = IntegrityReport()

    doc_ids = set()
    for path in (store.root / "documents").glob("*.manifest.json"):
        try:
            manifest = _read_json(path, "document manifest")
        except CorruptRecord as exc:
            report.add("corrupt_record", str(exc), path=str(path))
            continue
        doc_ids.add(manifest["doc_id"])
        raw = store.root / "documents" / f"{manifest['doc_id']}.raw"
        if not raw.exists():
            report.add("dangling_reference", f"raw body missing for {manifest['doc_id']}")
        else:
            if sha256_hex(raw.read_bytes()) != manifest["content_digest"]:
                report.add("digest_mismatch",
                           f"document body digest mismatch for {manifest['doc_id']}")

    def segment_resolves(segment_id: str) -> bool:
        try:
            store.lookup_segment(segment_id)
            return True
        except Exception:
            return False

    for path in (store.root / "evaluators").glob("*@*.json"):
        try:
            profile = EvaluatorProfile.from_dict(_read_json(path, "evaluator profile"))
        except (CorruptRecord, KeyError, ValueError) as exc:
            report.add("corrupt_record", f"evaluator {path.name}: {exc}", path=str(path))
            continue
        for doc_id, seg_ids in profile.role.theory_sources:
            for seg_id in seg_ids:
                if not segment_resolves(seg_id):
                    report.add("dangling_reference",
                               f"evaluator {profile.evaluator_id}@{profile.version} "
                               f"theory source {seg_id} does not resolve")
        for criterion in profile.criteria:
            for seg_id in criterion.guidance_refs:
                if not segment_resolves(seg_id):
                    report.add("dangling_reference",
                               f"criterion {criterion.criterion_id} guidance ref "
                               f"{seg_id} does not resolve")

    run_ids = set()
    for path in (store.root / "runs").glob("run-*.json"):
        if path.name.endswith(".transcript.json"):
            continue
        try:
            data = _read_json(path, "run record")
            data_no_digest = dict(data)
            data_no_digest.pop("run_digest", None)
            run = EvaluationRun.from_dict(data_no_digest)
        except (CorruptRecord, KeyError, ValueError) as exc:
            report.add("corrupt_record", f"run {path.name}: {exc}", path=str(path))
            continue
        run_ids.add(run.run_id)
        if data.get("run_digest") != run.run_digest():
            report.add("digest_mismatch", f"run {run.run_id} digest mismatch")
        if run.subject_doc_id not in doc_ids:
            report.add("dangling_reference",
                       f"run {run.run_id} subject {run.subject_doc_id} missing")
        if not store._evaluator_path(run.config.evaluator_id,
                                     run.config.evaluator_version).exists():
            report.add("dangling_reference",
                       f"run {run.run_id} evaluator "
                       f"{run.config.evaluator_id}@{run.config.evaluator_version} missing")
        for assessment in run.assessments:
            for claim in assessment.claims:
                for seg_id, _quote in claim.evidence:
                    if not segment_resolves(seg_id):
                        report.add("dangling_reference",
                                   f"run {run.run_id} criterion "
                                   f"{assessment.criterion_id} cites missing segment "
                                   f"{seg_id}")

    for path in (store.root / "sessions").glob("*.json"):
        try:
            session = _read_json(path, "session record")
        except CorruptRecord as exc:
            report.add("corrupt_record", str(exc), path=str(path))
            continue
        if session.get("subject_doc_id") not in doc_ids:
            report.add("dangling_reference",
                       f"session {session.get('session_id')} subject missing")
        run_id = session.get("run_id")
        if run_id and run_id not in run_ids and session.get("state") != "awaiting_human":
            report.add("dangling_reference",
                       f"session {session.get('session_id')} run {run_id} missing")

    for seq, message in store.audit.verify():
        report.add("audit_chain", message, seq=seq)

    return report
