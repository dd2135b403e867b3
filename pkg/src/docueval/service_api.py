"""HTTP/JSON facade over the full workflow.

A thin FastAPI layer: every route delegates to the core modules, every
internal error maps to exactly one (status, code) pair, and the blind-review
gate is enforced here again independently of the oversight module (defense
in depth). Long-running evaluations return 202 with a run_id for polling.

Auth is a single optional static bearer token (``DOCUEVAL_API_TOKEN``); when
unset the API is open for local use.
"""

from __future__ import annotations

import os
import threading
from pathlib import Path

from fastapi import Depends, FastAPI, File, Form, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import criteria as criteria_mod
from . import errors as err
from .engine import run_evaluation
from .errors import DocuevalError, error_code
from .guardrails import GuardrailPipeline
from .ingestion import decode_upload
from .oversight import (
    SessionManager,
    build_explanation_pack,
    compare_runs,
)
from .persistence import Store
from .runs import EvaluationConfig

API_TOKEN_ENV = "DOCUEVAL_API_TOKEN"

_STATUS_BY_ERROR: dict[type, int] = {
    err.UnknownDocument: 404,
    err.UnknownSegment: 404,
    err.UnknownEvaluator: 404,
    err.UnknownRun: 404,
    err.UnknownSession: 404,
    err.UnknownTarget: 404,
    err.PrematureReveal: 409,
    err.ResultsGated: 409,
    err.RunPending: 409,
    err.InvalidState: 409,
    err.WriteOnceViolation: 409,
    err.InvalidEncoding: 400,
    err.DuplicateCriterionName: 400,
    err.NonPositiveWeight: 400,
    err.ScoreOutOfRange: 400,
    err.DimensionMismatch: 400,
    err.BudgetTooSmall: 400,
    err.EmptyGuidance: 400,
    err.SubjectMismatch: 400,
    err.MissingScore: 400,
    err.UnknownProvider: 400,
    err.GuardrailBlocked: 400,
    err.MalformedOutput: 502,
    err.ProviderError: 502,
    err.ChainCorruption: 500,
    err.CorruptRecord: 500,
}


class RoleIn(BaseModel):
    role_name: str
    role_statement: str
    theory_sources: list[dict] = []


class CriterionIn(BaseModel):
    name: str
    description: str = ""
    weight: float = 1.0
    guidance_refs: list[str] = []


class EvaluatorIn(BaseModel):
    role: RoleIn
    criteria: list[CriterionIn]


class ExtractIn(BaseModel):
    doc_id: str
    use_provider: bool = False
    provider: dict | None = None


class RunIn(BaseModel):
    subject_doc_id: str
    config: dict


class SessionIn(BaseModel):
    subject_doc_id: str
    config: dict


class HumanReviewIn(BaseModel):
    entries: list[dict]


class AnnotationIn(BaseModel):
    target: str
    verdict: str
    explanation: str = ""


def _role_from(payload: RoleIn) -> criteria_mod.RoleSpec:
    return criteria_mod.RoleSpec(
        role_name=payload.role_name,
        role_statement=payload.role_statement,
        theory_sources=tuple(
            (s["doc_id"], tuple(s.get("segment_ids", ()))) for s in payload.theory_sources),
    )


def _criterion_from(payload: CriterionIn) -> criteria_mod.Criterion:
    return criteria_mod.Criterion.create(
        payload.name, description=payload.description, weight=payload.weight,
        guidance_refs=tuple(payload.guidance_refs))


def _config_from(store: Store, payload: dict) -> EvaluationConfig:
    data = dict(payload)
    if data.get("evaluator_version") is None and data.get("evaluator_id"):
        data["evaluator_version"] = store.latest_evaluator_version(data["evaluator_id"])
    try:
        return EvaluationConfig.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise RequestValidationError([{"msg": str(exc), "loc": ("config",)}]) from exc


def create_app(store_root: str | Path | None = None, store: Store | None = None,
               api_token: str | None = None, sync_runs: bool = False) -> FastAPI:
    """Application factory.

    ``sync_runs`` executes evaluations inline instead of in a background
    thread — the wire contract is identical (202 + poll), but tests and
    single-process tooling become deterministic.
    """
    if store is None:
        store = Store(store_root or os.environ.get("DOCUEVAL_STORE", "./docueval-store"))
    token = api_token if api_token is not None else os.environ.get(API_TOKEN_ENV)
    manager = SessionManager(store)
    pipeline = GuardrailPipeline()
    running: dict[str, str] = {}
    running_lock = threading.Lock()

    app = FastAPI(title="docueval", version="0.1.0")

    def require_auth(request: Request) -> None:
        if not token:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {token}":
            raise _Unauthorized()

    class _Unauthorized(Exception):
        pass

    @app.exception_handler(_Unauthorized)
    async def _unauthorized_handler(request: Request, exc: _Unauthorized):
        return JSONResponse(status_code=401, content={
            "code": "unauthorized", "message": "missing or invalid API token",
            "detail": None})

    @app.exception_handler(DocuevalError)
    async def _domain_error_handler(request: Request, exc: DocuevalError):
        status = _STATUS_BY_ERROR.get(type(exc), 500)
        if status == 500:
            store.audit.append("unexpected_error",
                               {"path": str(request.url.path), "error": str(exc)},
                               actor="system")
        return JSONResponse(status_code=status, content={
            "code": error_code(exc), "message": str(exc), "detail": None})

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={
            "code": "validation_error", "message": "request body failed validation",
            "detail": exc.errors()})

    @app.exception_handler(ValueError)
    async def _value_error_handler(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={
            "code": "validation_error", "message": str(exc), "detail": None})

    # --- misc ---------------------------------------------------------------

    @app.get("/health")
    def health():
        return {"status": "ok"}

    # --- documents ------------------------------------------------------------

    @app.post("/documents", dependencies=[Depends(require_auth)])
    def upload_document(file: UploadFile = File(...), doc_class: str = Form(...),
                        title: str = Form("")):
        data = file.file.read()
        verdict = pipeline.run("upload", {"filename": file.filename or "", "data": data})
        if not verdict.passed:
            store.audit.append("upload_rejected",
                               {"filename": file.filename,
                                "findings": [f.to_dict() for f in verdict.findings]},
                               actor="user")
            raise err.GuardrailBlocked(
                "upload rejected: " + "; ".join(
                    f.message for f in verdict.findings if f.severity == "block"),
                findings=list(verdict.findings))
        body = decode_upload(file.filename or "", data)
        doc, segments, created = store.add_document(
            doc_class=doc_class,
            title=title or Path(file.filename or "document").stem,
            body=body, source_filename=file.filename or "")
        payload = {**doc.to_dict(), "segments": len(segments), "created": created,
                   "warnings": [f.to_dict() for f in verdict.findings]}
        return JSONResponse(status_code=201 if created else 200, content=payload)

    @app.get("/documents", dependencies=[Depends(require_auth)])
    def list_documents(doc_class: str | None = None):
        return {"documents": store.list_documents(doc_class)}

    @app.get("/documents/{doc_id}", dependencies=[Depends(require_auth)])
    def get_document(doc_id: str):
        manifest = store.get_manifest(doc_id)
        document = store.get_document(doc_id)
        return {**manifest, "body": document.body}

    @app.get("/documents/{doc_id}/segments/{n}", dependencies=[Depends(require_auth)])
    def get_segment(doc_id: str, n: int):
        segment = store.lookup_segment(f"{doc_id}/{n}")
        return segment.to_dict()

    # --- evaluators -------------------------------------------------------------

    @app.post("/evaluators", dependencies=[Depends(require_auth)])
    def create_evaluator(payload: EvaluatorIn):
        profile = criteria_mod.create_evaluator(
            _role_from(payload.role), [_criterion_from(c) for c in payload.criteria])
        store.save_evaluator(profile)
        return JSONResponse(status_code=201, content=profile.to_dict())

    @app.get("/evaluators", dependencies=[Depends(require_auth)])
    def list_evaluators():
        return {"evaluators": store.list_evaluators()}

    @app.get("/evaluators/{evaluator_id}", dependencies=[Depends(require_auth)])
    def get_evaluator(evaluator_id: str, version: int | None = None):
        return store.load_evaluator(evaluator_id, version).to_dict()

    @app.post("/evaluators/extract-criteria", dependencies=[Depends(require_auth)])
    def extract_criteria(payload: ExtractIn):
        parsed = store.get_parsed(payload.doc_id)
        segments = store.load_segments(payload.doc_id)
        provider = None
        if payload.use_provider:
            from .providers import build_provider
            provider = build_provider(payload.provider)
        extracted = criteria_mod.extract_criteria(parsed, provider, segments)
        store.audit.append("criteria_extracted",
                           {"doc_id": payload.doc_id, "count": len(extracted)},
                           actor="user")
        return {"criteria": [c.to_dict() for c in extracted]}

    @app.post("/evaluators/{evaluator_id}/inherit", dependencies=[Depends(require_auth)])
    def inherit_evaluator(evaluator_id: str, version: int | None = None):
        parent = store.load_evaluator(evaluator_id, version)
        child = criteria_mod.inherit_evaluator(parent)
        store.save_evaluator(child)
        return JSONResponse(status_code=201, content=child.to_dict())

    @app.post("/evaluators/{evaluator_id}/criteria", dependencies=[Depends(require_auth)])
    def upsert_criterion(evaluator_id: str, payload: CriterionIn):
        latest = store.load_evaluator(evaluator_id)
        updated = criteria_mod.upsert_criterion(latest, _criterion_from(payload))
        store.save_evaluator(updated)
        return JSONResponse(status_code=201, content=updated.to_dict())

    # --- runs ---------------------------------------------------------------

    def _execute_run(subject_doc_id: str, config: EvaluationConfig, run_id: str):
        try:
            run_evaluation(subject_doc_id, config, store, run_id=run_id)
        except err.PartialFailure:
            pass
        except DocuevalError as exc:
            store.audit.append("run_aborted", {"run_id": run_id, "error": str(exc)},
                               actor="system")
        finally:
            with running_lock:
                running.pop(run_id, None)

    @app.post("/runs", dependencies=[Depends(require_auth)], status_code=202)
    def start_run(payload: RunIn):
        store.get_document(payload.subject_doc_id)
        config = _config_from(store, payload.config)
        store.load_evaluator(config.evaluator_id, config.evaluator_version)
        run_id = store.new_run_id()
        with running_lock:
            running[run_id] = "running"
        if sync_runs:
            _execute_run(payload.subject_doc_id, config, run_id)
        else:
            thread = threading.Thread(
                target=_execute_run, args=(payload.subject_doc_id, config, run_id),
                daemon=True)
            thread.start()
        return {"run_id": run_id, "status": "running"}

    @app.get("/runs", dependencies=[Depends(require_auth)])
    def list_runs(subject_doc_id: str | None = None, evaluator_id: str | None = None):
        return {"runs": store.list_runs(subject_doc_id, evaluator_id)}

    @app.get("/runs/compare", dependencies=[Depends(require_auth)])
    def compare(a: str, b: str):
        return compare_runs(store.load_run(a), store.load_run(b), store)

    @app.get("/runs/{run_id}", dependencies=[Depends(require_auth)])
    def get_run(run_id: str):
        if store.run_exists(run_id):
            store.audit.append("admin_run_access", {"run_id": run_id}, actor="user")
            return store.load_run(run_id).to_dict()
        with running_lock:
            if running.get(run_id) == "running":
                return {"run_id": run_id, "status": "running"}
        raise err.UnknownRun(f"run {run_id!r} not found")

    @app.get("/runs/{run_id}/explanation-pack", dependencies=[Depends(require_auth)])
    def explanation_pack(run_id: str):
        run = store.load_run(run_id)
        store.audit.append("admin_run_access", {"run_id": run_id, "view": "explanation"},
                           actor="user")
        return build_explanation_pack(run, store).to_dict()

    # --- sessions --------------------------------------------------------------

    def _session_summary(session_id: str) -> dict:
        session = manager.load(session_id)
        evaluator = store.load_evaluator(session.config.evaluator_id,
                                         session.config.evaluator_version)
        run_finished = store.run_exists(session.run_id)
        return {
            "session_id": session.session_id,
            "subject_doc_id": session.subject_doc_id,
            "state": session.state,
            "created_at": session.created_at,
            "run_status": "finished" if run_finished else "running",
            "score_scale": list(session.config.score_scale),
            "criteria": [
                {"criterion_id": c.criterion_id, "name": c.name,
                 "description": c.description, "weight": c.weight}
                for c in evaluator.criteria
            ],
            "annotations": [a.to_dict() for a in session.annotations],
            "human_review": (session.human_review.to_dict()
                             if session.human_review else None),
        }

    @app.post("/sessions", dependencies=[Depends(require_auth)], status_code=201)
    def open_session(payload: SessionIn):
        config = _config_from(store, payload.config)
        store.load_evaluator(config.evaluator_id, config.evaluator_version)
        session = manager.open_session(payload.subject_doc_id, config,
                                       execute_run=False)
        if sync_runs:
            manager.execute_pending_run(session.session_id)
        else:
            thread = threading.Thread(
                target=manager.execute_pending_run, args=(session.session_id,),
                daemon=True)
            thread.start()
        return _session_summary(session.session_id)

    @app.get("/sessions", dependencies=[Depends(require_auth)])
    def list_sessions():
        return {"sessions": [
            {"session_id": s["session_id"], "subject_doc_id": s["subject_doc_id"],
             "state": s["state"], "created_at": s["created_at"]}
            for s in store.list_sessions()
        ]}

    @app.get("/sessions/{session_id}", dependencies=[Depends(require_auth)])
    def get_session(session_id: str):
        return _session_summary(session_id)

    @app.post("/sessions/{session_id}/human-review", dependencies=[Depends(require_auth)])
    def submit_review(session_id: str, payload: HumanReviewIn):
        manager.submit_human_review(session_id, payload.entries)
        return _session_summary(session_id)

    @app.post("/sessions/{session_id}/reveal", dependencies=[Depends(require_auth)])
    def reveal(session_id: str):
        run, report = manager.reveal_ai_results(session_id)
        return {"session": _session_summary(session_id), "run": run.to_dict(),
                "comparison": report.to_dict()}

    @app.get("/sessions/{session_id}/ai-results", dependencies=[Depends(require_auth)])
    def ai_results(session_id: str):
        # Defense in depth: the gate is enforced here before the oversight
        # module is even consulted.
        state = store.load_session_dict(session_id)["state"]
        if state in ("awaiting_human", "human_submitted"):
            raise err.PrematureReveal(
                "AI results are gated until the human review is submitted and revealed")
        run, report = manager.get_ai_results(session_id)
        return {"run": run.to_dict(), "comparison": report.to_dict()}

    @app.post("/sessions/{session_id}/annotations", dependencies=[Depends(require_auth)])
    def annotate(session_id: str, payload: AnnotationIn):
        manager.annotate(session_id, payload.target, payload.verdict,
                         payload.explanation)
        return _session_summary(session_id)

    # --- audit ----------------------------------------------------------------

    @app.get("/audit", dependencies=[Depends(require_auth)])
    def audit_records(from_seq: int = 1):
        records = [r.to_dict() for r in store.audit.records() if r.seq >= from_seq]
        return {"records": records}

    app.state.store = store
    app.state.session_manager = manager
    return app
