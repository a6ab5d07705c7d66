"""Batch command surface: the scriptable twin of the HTTP service.

Every command is a thin wrapper over one library operation: read manifests
and blobs, call the operation, write manifests/reports (and, on the report
path, the rendered figures). Exit codes: 0 success, 1 operational error,
2 usage error.
"""

from __future__ import annotations

import base64
import functools
import json
import sys
from pathlib import Path

import click

from . import dedup as dedup_mod
from .config import CliConfig
from .embeddings import EmbeddingVector
from .errors import CurationError
from .index import QueryMode, RetrievalQuery, VectorIndex, expand_batch
from .metrics import write_reports
from .pipeline import run_filter_pass
from .records import Manifest, ManifestEntry
from .reporting import render_report_figures
from .sampling import SamplingPlan, build_sampling_plan, sample_manifest
from .thresholds import load_single_profile

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".webp"}

_MODE_MAP = {
    "image": QueryMode.IMAGE,
    "multi": QueryMode.MULTI_IMAGE,
    "text": QueryMode.TEXT,
    "hybrid": QueryMode.HYBRID,
    "batch": QueryMode.BATCH,
}


def operational_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except CurationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except OSError as exc:
            click.echo(f"io error: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON config file; falls back to $CURATION_CONFIG.")
@click.pass_context
def main(ctx, config_path):
    """Dataset curation toolkit: scoring, retrieval, dedup, sampling."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


def _config(ctx) -> CliConfig:
    return CliConfig.load(ctx.obj.get("config_path"))


@main.command()
@click.option("--root", type=click.Path(exists=True), required=True, help="Directory to scan for images.")
@click.option("--out", type=click.Path(), required=True, help="Manifest output path.")
@click.option("--task", default="T2I", show_default=True)
@click.option("--category", default="PHOTOREALISTIC", show_default=True)
@click.option("--layout", type=click.Choice(["flat", "tagged"]), default="flat", show_default=True,
              help="tagged expects root/<task>/<category>/image files.")
@click.pass_context
@operational_errors
def ingest(ctx, root, out, task, category, layout):
    """Scan a directory of images into a manifest.

    Manifest URIs are stored relative to the configured corpus root when the
    scanned files live under it, absolute otherwise.
    """
    cfg = _config(ctx)
    root_path = Path(root)
    corpus_root = cfg.corpus_root.resolve()
    entries = []
    for path in sorted(root_path.rglob("*")):
        if path.suffix.lower() not in _IMAGE_SUFFIXES or not path.is_file():
            continue
        rel = path.relative_to(root_path)
        if layout == "tagged" and len(rel.parts) >= 3:
            entry_task, entry_category = rel.parts[0], rel.parts[1]
        else:
            entry_task, entry_category = task, category
        resolved = path.resolve()
        try:
            uri = str(resolved.relative_to(corpus_root))
        except ValueError:
            uri = str(resolved)
        entries.append(
            ManifestEntry(
                record_id=str(rel).replace("\\", "/"),
                uri=uri,
                task=entry_task,
                category=entry_category,
            )
        )
    manifest = Manifest.from_entries(entries, metadata={"root": str(root_path)})
    manifest.write(out)
    click.echo(f"ingested {len(entries)} records -> {out}")


def _stage_profile(cfg: CliConfig, stage: str, profile_path):
    if profile_path:
        return load_single_profile(profile_path, stage.upper())
    return cfg.thresholds[stage.upper()]


@main.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--stage", type=click.Choice(["pt", "ct", "sft"], case_sensitive=False), default="pt")
@click.option("--threshold-profile", "profile_path", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None, help="Report directory (default: alongside manifest).")
@click.pass_context
@operational_errors
def score(ctx, manifest_path, stage, profile_path, out):
    """Score every record and write reports + figures, dropping nothing."""
    cfg = _config(ctx)
    profile = _stage_profile(cfg, stage, profile_path)
    manifest = Manifest.read(manifest_path)
    _, report = run_filter_pass(
        manifest, profile, cfg.build_scorers(), cfg.blob_loader(), inspection_seed=cfg.seed
    )
    out_dir = Path(out) if out else Path(manifest_path).parent / f"report_{stage.lower()}"
    out_dir.mkdir(parents=True, exist_ok=True)
    write_reports(report.reports, out_dir / "quality_reports.jsonl")
    report.write(out_dir / "pass_report.json")
    figures = render_report_figures(report, out_dir / "figures", profile)
    click.echo(
        f"scored {report.total} records: {report.passed} pass, {report.failed} fail; "
        f"report in {out_dir} ({len(figures)} figures)"
    )


@main.command(name="filter")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--stage", type=click.Choice(["pt", "ct", "sft"], case_sensitive=False), default="pt")
@click.option("--threshold-profile", "profile_path", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), required=True, help="Filtered manifest output path.")
@click.pass_context
@operational_errors
def filter_cmd(ctx, manifest_path, stage, profile_path, out):
    """Score records and write the surviving manifest plus the report."""
    cfg = _config(ctx)
    profile = _stage_profile(cfg, stage, profile_path)
    manifest = Manifest.read(manifest_path)
    filtered, report = run_filter_pass(
        manifest, profile, cfg.build_scorers(), cfg.blob_loader(), inspection_seed=cfg.seed
    )
    filtered.write(out)
    out_dir = Path(out).parent
    write_reports(report.reports, out_dir / "quality_reports.jsonl")
    report.write(out_dir / "pass_report.json")
    render_report_figures(report, out_dir / "figures", profile)
    click.echo(f"kept {len(filtered)}/{report.total} records -> {out}")


@main.command(name="dedup")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True, help="Deduplicated manifest output path.")
@click.option("--groups-out", type=click.Path(), default=None)
@click.option("--threshold", type=float, default=None, help="Cosine threshold (default from config).")
@click.option("--policy", type=click.Choice(["keep-representative", "drop-all"]), default="keep-representative")
@click.pass_context
@operational_errors
def dedup_cmd(ctx, manifest_path, out, groups_out, threshold, policy):
    """Find near-duplicate groups and drop them from the manifest."""
    cfg = _config(ctx)
    manifest = Manifest.read(manifest_path)
    gateway = cfg.build_gateway()
    loader = cfg.blob_loader()
    vectors = {e.record_id: gateway.embed_image(loader(e.uri)) for e in manifest}
    groups = dedup_mod.find_near_duplicates(
        vectors, threshold if threshold is not None else cfg.dedup_threshold
    )
    policy_name = (
        dedup_mod.KEEP_REPRESENTATIVE if policy == "keep-representative" else dedup_mod.DROP_ALL_DUPES
    )
    result = dedup_mod.dedup_manifest(manifest, groups, policy_name)
    result.write(out)
    if groups_out:
        dedup_mod.write_groups(groups, groups_out)
    click.echo(f"{len(groups)} duplicate groups; kept {len(result)}/{len(manifest)} -> {out}")


@main.command(name="index-build")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), default=None, help="Index base path (default from config).")
@click.option("--seed", type=int, default=None)
@click.pass_context
@operational_errors
def index_build(ctx, manifest_path, out, seed):
    """Embed every record and build the searchable index."""
    cfg = _config(ctx)
    manifest = Manifest.read(manifest_path)
    gateway = cfg.build_gateway()
    loader = cfg.blob_loader()
    index = VectorIndex(dim=gateway.dim, seed=seed if seed is not None else cfg.seed)
    for entry in manifest:
        index.insert(entry.record_id, gateway.embed_image(loader(entry.uri)))
    index.build()
    base = Path(out) if out else cfg.index_path
    base.parent.mkdir(parents=True, exist_ok=True)
    header, blob = index.save(base)
    if cfg.cache_path:
        gateway.cache.save()
    click.echo(f"indexed {len(index)} vectors -> {header}, {blob}")


@main.command()
@click.option("--mode", type=click.Choice(sorted(_MODE_MAP)), default="image")
@click.option("--seeds", default="", help="Comma-separated image paths or record ids.")
@click.option("--text", default="", help="Query text for text/hybrid modes.")
@click.option("--alpha", type=float, default=0.5, show_default=True)
@click.option("-k", "--k", type=int, default=10, show_default=True)
@click.option("--clusters", type=int, default=0, help="Diversity clusters; 0 disables re-ranking.")
@click.option("--ann/--exact", default=False, help="Use the approximate graph instead of a full scan.")
@click.option("--index-path", type=click.Path(), default=None)
@click.option("--out", type=click.Path(), default=None, help="Write results JSON here instead of stdout.")
@click.pass_context
@operational_errors
def search(ctx, mode, seeds, text, alpha, k, clusters, ann, index_path, out):
    """Query the index in any retrieval mode."""
    cfg = _config(ctx)
    base = Path(index_path) if index_path else cfg.index_path
    index = VectorIndex.load(base)
    gateway = cfg.build_gateway()

    seed_vectors: list[EmbeddingVector] = []
    for token in [s.strip() for s in seeds.split(",") if s.strip()]:
        path = Path(token)
        if path.exists():
            seed_vectors.append(gateway.embed_image(path.read_bytes()))
        elif token in index:
            seed_vectors.append(index.vector(token))
        else:
            raise CurationError(f"seed {token!r} is neither a readable file nor a record id")
    if text:
        seed_vectors.append(gateway.embed_text(text))

    query = RetrievalQuery(
        mode=_MODE_MAP[mode],
        seed_vectors=seed_vectors,
        k=k,
        hybrid_alpha=alpha,
        diversity_clusters=clusters,
        seed=cfg.seed,
    )
    query.validate()
    if query.mode == QueryMode.BATCH:
        outcomes = index.batch_search(expand_batch(query), exact=not ann)
        body = [
            {"error": str(o)} if isinstance(o, Exception)
            else {"results": [e.to_dict() for e in o.entries]}
            for o in outcomes
        ]
    else:
        rs = index.search(query, exact=not ann)
        body = {"exact": rs.exact, "results": [e.to_dict() for e in rs.entries]}
    payload = json.dumps(body, indent=2)
    if out:
        Path(out).write_text(payload + "\n", encoding="utf-8")
        click.echo(f"wrote results -> {out}")
    else:
        click.echo(payload)


@main.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--stage", type=click.Choice(["pt", "ct", "sft"], case_sensitive=False), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), required=True, help="Plan JSON output path.")
@click.pass_context
@operational_errors
def plan(ctx, manifest_path, stage, seed, out):
    """Build a stage sampling plan from a manifest's category counts."""
    cfg = _config(ctx)
    manifest = Manifest.read(manifest_path)
    sampling_plan = build_sampling_plan(
        stage.upper(),
        manifest.category_counts(),
        upweights=cfg.upweights,
        flatten_strength=cfg.flatten_strength,
        seed=seed if seed is not None else cfg.seed,
    )
    sampling_plan.write(out)
    click.echo(f"plan for {stage.upper()} -> {out}")


@main.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--stage", type=click.Choice(["pt", "ct", "sft"], case_sensitive=False), default=None)
@click.option("--plan", "plan_path", type=click.Path(exists=True), default=None,
              help="Existing plan JSON; otherwise built from --stage.")
@click.option("-n", "--n", type=int, required=True)
@click.option("--seed", type=int, default=None)
@click.option("--strict/--lenient", default=False, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.pass_context
@operational_errors
def sample(ctx, manifest_path, stage, plan_path, n, seed, strict, out):
    """Draw a stage-shaped sample from a manifest."""
    cfg = _config(ctx)
    manifest = Manifest.read(manifest_path)
    if plan_path:
        sampling_plan = SamplingPlan.read(plan_path)
    else:
        if not stage:
            raise click.UsageError("either --plan or --stage is required")
        sampling_plan = build_sampling_plan(
            stage.upper(),
            manifest.category_counts(),
            upweights=cfg.upweights,
            flatten_strength=cfg.flatten_strength,
            seed=seed if seed is not None else cfg.seed,
        )
    sampled, shortfall = sample_manifest(sampling_plan, manifest, n, strict=strict)
    sampled.write(out)
    summary = ", ".join(f"{t}={c['drawn']}" for t, c in shortfall.per_task.items())
    click.echo(f"sampled {shortfall.drawn}/{n} ({summary}) -> {out}")


@main.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True, help="Export directory.")
@click.pass_context
@operational_errors
def export(ctx, manifest_path, out):
    """Copy manifest blobs into a self-contained export directory."""
    cfg = _config(ctx)
    manifest = Manifest.read(manifest_path)
    loader = cfg.blob_loader()
    out_dir = Path(out)
    blob_dir = out_dir / "blobs"
    blob_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for entry in manifest:
        blob = loader(entry.uri)
        suffix = Path(entry.uri).suffix or ".bin"
        name = entry.record_id.replace("/", "_") + suffix
        (blob_dir / name).write_bytes(blob)
        entries.append(
            ManifestEntry(
                record_id=entry.record_id,
                uri=f"blobs/{name}",
                task=entry.task,
                category=entry.category,
                decision=entry.decision,
                caption_version=entry.caption_version,
            )
        )
    exported = Manifest.from_entries(entries, metadata={**manifest.metadata, "exported_from": str(manifest_path)})
    exported.write(out_dir / "manifest.jsonl")
    click.echo(f"exported {len(entries)} blobs -> {out_dir}")


@main.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), default=None,
              help="Manifest backing thumbnails and filter runs.")
@click.option("--index-path", type=click.Path(), default=None)
@click.option("--report", "report_path", type=click.Path(exists=True), default=None,
              help="Pass report JSON preloaded into /v1/stats.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.pass_context
@operational_errors
def serve(ctx, manifest_path, index_path, report_path, host, port):
    """Run the HTTP service."""
    import uvicorn

    from .pipeline import PassReport
    from .service import ServiceState, create_app

    cfg = _config(ctx)
    base = Path(index_path) if index_path else cfg.index_path
    index = VectorIndex.load(base)
    manifest = Manifest.read(manifest_path) if manifest_path else None
    state = ServiceState(
        index=index,
        gateway=cfg.build_gateway(),
        manifest=manifest,
        blob_root=cfg.corpus_root,
        providers=cfg.build_scorers(),
        profiles=cfg.thresholds,
        annotation_log=cfg.annotation_log,
        preloaded_report=PassReport.read(report_path) if report_path else None,
    )
    uvicorn.run(create_app(state), host=host, port=port)


if __name__ == "__main__":
    main()
