"""Command-line driver for batch and scripted use.

Exit codes are stable: 0 success, 1 validation/user error, 2 partial run
failure, 3 store corruption. ``--format json`` output is the same
serialization the service API returns.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import criteria as criteria_mod
from .canonical import canonical_json
from .engine import run_evaluation
from .errors import DocuevalError, PartialFailure
from .oversight import compare_runs
from .persistence import Store, verify_store
from .runs import EvaluationConfig

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_PARTIAL_FAILURE = 2
EXIT_STORE_CORRUPTION = 3


@click.group()
@click.option("--store", "store_root", envvar="DOCUEVAL_STORE",
              default="./docueval-store", show_default=True,
              help="Store root directory (env: DOCUEVAL_STORE).")
@click.pass_context
def main(ctx: click.Context, store_root: str):
    """Evidence-grounded document evaluation workflows."""
    ctx.ensure_object(dict)
    ctx.obj["store_root"] = store_root


def _store(ctx: click.Context) -> Store:
    return Store(ctx.obj["store_root"])


def _fail(message: str, code: int = EXIT_USER_ERROR):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@main.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--doc-class", required=True,
              type=click.Choice(["subject", "criteria_guidance", "evaluation_example",
                                 "reference_standard"]))
@click.option("--title", default="", help="Document title (defaults to the file stem).")
@click.option("--max-segment-chars", default=4000, show_default=True)
@click.pass_context
def ingest(ctx, path: str, doc_class: str, title: str, max_segment_chars: int):
    """Ingest a markdown or plain-text document into the store."""
    store = _store(ctx)
    file_path = Path(path)
    try:
        body = file_path.read_bytes().decode("utf-8")
    except UnicodeDecodeError:
        _fail(f"{path} is not valid UTF-8")
    try:
        doc, segments, created = store.add_document(
            doc_class=doc_class, title=title or file_path.stem, body=body,
            source_filename=file_path.name, max_segment_chars=max_segment_chars)
    except DocuevalError as exc:
        _fail(str(exc))
    click.echo(json.dumps({"doc_id": doc.doc_id, "segments": len(segments),
                           "created": created}))


@main.group()
def evaluator():
    """Create, inherit and extend evaluators."""


@evaluator.command("create")
@click.option("--role-name", required=True)
@click.option("--role-statement", required=True)
@click.option("--criteria-json", required=True,
              help='JSON array of {"name", "description", "weight"} or a @file path.')
@click.pass_context
def evaluator_create(ctx, role_name: str, role_statement: str, criteria_json: str):
    store = _store(ctx)
    if criteria_json.startswith("@"):
        criteria_json = Path(criteria_json[1:]).read_text(encoding="utf-8")
    try:
        rows = json.loads(criteria_json)
        criteria = [criteria_mod.Criterion.create(
            row["name"], description=row.get("description", ""),
            weight=row.get("weight", 1.0),
            guidance_refs=tuple(row.get("guidance_refs", ()))) for row in rows]
        profile = criteria_mod.create_evaluator(
            criteria_mod.RoleSpec(role_name=role_name, role_statement=role_statement),
            criteria)
        store.save_evaluator(profile)
    except (DocuevalError, ValueError, KeyError) as exc:
        _fail(str(exc))
    click.echo(json.dumps({"evaluator_id": profile.evaluator_id,
                           "version": profile.version}))


@evaluator.command("extract")
@click.option("--doc", "doc_id", required=True, help="criteria_guidance document id.")
@click.pass_context
def evaluator_extract(ctx, doc_id: str):
    """Extract criteria from a guidance document (heading-based fallback)."""
    store = _store(ctx)
    try:
        parsed = store.get_parsed(doc_id)
        segments = store.load_segments(doc_id)
        extracted = criteria_mod.extract_criteria(parsed, None, segments)
    except DocuevalError as exc:
        _fail(str(exc))
    click.echo(json.dumps({"criteria": [c.to_dict() for c in extracted]}, indent=2))


def _parse_evaluator_ref(ref: str, store: Store) -> tuple[str, int]:
    if "@" in ref:
        evaluator_id, _, version = ref.rpartition("@")
        try:
            return evaluator_id, int(version)
        except ValueError:
            _fail(f"bad evaluator reference {ref!r}, expected id@version")
    return ref, store.latest_evaluator_version(ref)


@main.command()
@click.option("--doc", "docs", multiple=True, required=True,
              help="Subject document id or file path; repeat for batch runs.")
@click.option("--evaluator", "evaluator_ref", required=True,
              help="Evaluator reference id@version (version defaults to latest).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON run configuration file.")
@click.option("--provider", type=click.Choice(["stub", "http"]), default=None,
              help="Override the configured provider.")
@click.option("--seed", type=int, default=None, help="Stub provider seed override.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="./reports",
              show_default=True, help="Directory for per-run JSON reports.")
@click.pass_context
def evaluate(ctx, docs, evaluator_ref, config_path, provider, seed, out_dir):
    """Run evaluations sequentially over the listed documents."""
    store = _store(ctx)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    config_data: dict = {}
    if config_path:
        try:
            config_data = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except ValueError as exc:
            _fail(f"bad config file: {exc}")
    try:
        evaluator_id, version = _parse_evaluator_ref(evaluator_ref, store)
        config_data["evaluator_id"] = evaluator_id
        config_data["evaluator_version"] = version
        if provider is not None:
            config_data.setdefault("provider", {})
            config_data["provider"] = {"name": provider,
                                       "params": config_data["provider"].get("params", {})}
        if seed is not None:
            provider_spec = config_data.get("provider", {"name": "stub", "params": {}})
            provider_spec.setdefault("params", {})["seed"] = seed
            config_data["provider"] = provider_spec
        config = EvaluationConfig.from_dict(config_data)
        store.load_evaluator(evaluator_id, version)
    except (DocuevalError, ValueError, TypeError, KeyError) as exc:
        _fail(str(exc))

    summary = []
    any_failed = False
    for doc_ref in docs:
        entry = {"doc": doc_ref, "run_id": None, "status": "failed", "error": None}
        try:
            doc_id = _resolve_doc(store, doc_ref)
            run = run_evaluation(doc_id, config, store)
            entry.update(run_id=run.run_id, status="ok")
            _write_report(out, run.run_id, run.to_dict())
            click.echo(run.run_id)
        except PartialFailure as exc:
            any_failed = True
            entry.update(run_id=exc.run.run_id if exc.run else None,
                         status="partial_failure", error=str(exc))
            if exc.run is not None:
                _write_report(out, exc.run.run_id, exc.run.to_dict())
                click.echo(exc.run.run_id)
        except (DocuevalError, OSError, ValueError) as exc:
            any_failed = True
            entry["error"] = f"{type(exc).__name__}: {exc}"
        summary.append(entry)

    ok = sum(1 for e in summary if e["status"] == "ok")
    batch = {"schema_version": 1, "ok": ok, "failed": len(summary) - ok, "runs": summary}
    (out / "batch_summary.json").write_text(canonical_json(batch) + "\n", encoding="utf-8")
    click.echo(f"{ok} ok / {len(summary) - ok} failed", err=True)
    sys.exit(EXIT_PARTIAL_FAILURE if any_failed else EXIT_OK)


def _resolve_doc(store: Store, doc_ref: str) -> str:
    path = Path(doc_ref)
    if path.exists() and path.is_file():
        body = path.read_bytes().decode("utf-8")
        doc, _, _ = store.add_document(doc_class="subject", title=path.stem,
                                       body=body, source_filename=path.name)
        return doc.doc_id
    store.get_document(doc_ref)
    return doc_ref


def _write_report(out: Path, run_id: str, payload: dict) -> None:
    (out / f"{run_id}.json").write_text(canonical_json(payload) + "\n", encoding="utf-8")


@main.command()
@click.option("--run-a", required=True)
@click.option("--run-b", required=True)
@click.option("--format", "output_format", type=click.Choice(["json", "text"]),
              default="json", show_default=True)
@click.pass_context
def compare(ctx, run_a: str, run_b: str, output_format: str):
    """Compare two runs: config diff and per-criterion score deltas."""
    store = _store(ctx)
    try:
        report = compare_runs(store.load_run(run_a), store.load_run(run_b), store)
    except DocuevalError as exc:
        _fail(str(exc))
    if output_format == "json":
        click.echo(json.dumps(report, indent=2, sort_keys=True))
        return
    click.echo(f"runs {report['run_a']} vs {report['run_b']} "
               f"on {report['subject_doc_id']}")
    if not report["config_diff"]:
        click.echo("config: identical")
    for row in report["config_diff"]:
        click.echo(f"config {row['field']}: {row['a']!r} -> {row['b']!r}")
    for row in report["criteria"]:
        delta = row["delta"]
        delta_text = f"{delta:+d}" if isinstance(delta, int) else "n/a"
        click.echo(f"{row['criterion_name']}: {row['score_a']} vs {row['score_b']} "
                   f"(delta {delta_text})")
    for name in report["unmatched_criteria_a"]:
        click.echo(f"only in run A: {name}")
    for name in report["unmatched_criteria_b"]:
        click.echo(f"only in run B: {name}")


@main.command()
@click.option("--store", "store_path", default=None,
              help="Store root to verify (defaults to the global --store).")
@click.pass_context
def verify(ctx, store_path: str | None):
    """Verify cross-references and the audit chain; exit 3 on violations."""
    root = Path(store_path or ctx.obj["store_root"])
    if not root.exists():
        _fail(f"store path {root} does not exist")
    report = verify_store(root)
    click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    sys.exit(EXIT_OK if report.ok else EXIT_STORE_CORRUPTION)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--sync-runs", is_flag=True, default=False,
              help="Execute runs inline instead of in background threads.")
@click.pass_context
def serve(ctx, host: str, port: int, sync_runs: bool):
    """Serve the HTTP API (token via DOCUEVAL_API_TOKEN, optional)."""
    import uvicorn

    from .service_api import create_app

    app = create_app(store_root=ctx.obj["store_root"], sync_runs=sync_runs)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
