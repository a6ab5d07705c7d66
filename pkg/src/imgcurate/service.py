"""HTTP service: retrieval, annotation feedback, filter runs and stats.

The service is a thin shell over the library: a search request is executed
by the same index call a script would make, and annotation events reshape
the session's next query (positives become the new multi-image seed set,
negatives become a hard exclusion set). Single process, in-memory sessions,
append-only annotation log.
"""

from __future__ import annotations

import base64
import io
import itertools
import json
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field
from PIL import Image

from .embeddings import EmbeddingGateway, EmbeddingVector
from .errors import (
    CurationError,
    DegenerateAggregate,
    EmptyIndex,
    IndexNotBuilt,
    InvalidQuery,
    NoPositives,
    UnknownQuery,
)
from .index import QueryMode, ResultSet, RetrievalQuery, VectorIndex, aggregate_multi, expand_batch
from .pipeline import PassReport, run_filter_pass
from .records import Manifest
from .scorers import ScorerProviderSet
from .thresholds import DEFAULT_PROFILES, ThresholdProfile

THUMBNAIL_EDGE = 128

LABEL_POSITIVE = "POSITIVE"
LABEL_NEGATIVE = "NEGATIVE"


@dataclass
class StoredQuery:
    query: RetrievalQuery
    result_ids: list[str]


@dataclass
class Session:
    session_id: str
    queries: dict[str, StoredQuery] = field(default_factory=dict)
    positives: set[str] = field(default_factory=set)
    negatives: set[str] = field(default_factory=set)
    lock: threading.Lock = field(default_factory=threading.Lock)
    counter: itertools.count = field(default_factory=itertools.count)


RUN_PENDING = "PENDING"
RUN_RUNNING = "RUNNING"
RUN_DONE = "DONE"
RUN_FAILED = "FAILED"


@dataclass
class FilterRun:
    run_id: str
    manifest_ref: str
    stage: str
    status: str = RUN_PENDING
    report: Optional[PassReport] = None
    error: str = ""


class SearchPayload(BaseModel):
    session_id: str = ""
    mode: str = "image"
    seed_record_ids: list[str] = Field(default_factory=list)
    seed_blobs_b64: list[str] = Field(default_factory=list)
    text: str = ""
    alpha: float = 0.5
    k: int = 10
    diversity_clusters: int = 0
    candidate_multiplier: int = 5
    use_ann: bool = False


class AnnotationPayload(BaseModel):
    session_id: str
    query_id: str
    record_id: str
    label: str


class RefinePayload(BaseModel):
    k: int = 10
    diversity_clusters: int = 0
    use_ann: bool = False


class FilterRunPayload(BaseModel):
    manifest: str
    stage: str


class ServiceState:
    """Everything the handlers share; guarded by coarse locks."""

    def __init__(
        self,
        index: VectorIndex,
        gateway: EmbeddingGateway,
        *,
        manifest: Optional[Manifest] = None,
        blob_root: Optional[Path] = None,
        providers: Optional[ScorerProviderSet] = None,
        profiles: Optional[dict[str, ThresholdProfile]] = None,
        annotation_log: Optional[Path] = None,
        session_snapshot: Optional[Path] = None,
        preloaded_report: Optional[PassReport] = None,
    ):
        self.index = index
        self.gateway = gateway
        self.manifest = manifest
        self.blob_root = blob_root
        self.providers = providers or ScorerProviderSet.stub()
        self.profiles = profiles or dict(DEFAULT_PROFILES)
        self.annotation_log = annotation_log
        self.session_snapshot = session_snapshot
        self.sessions: dict[str, Session] = {}
        self.runs: dict[str, FilterRun] = {}
        self._sessions_lock = threading.Lock()
        self._runs_lock = threading.Lock()
        self._log_lock = threading.Lock()
        self._events_since_snapshot = 0
        self.executor = ThreadPoolExecutor(max_workers=2)
        self.latest_report: Optional[PassReport] = preloaded_report

    def session(self, session_id: str) -> Session:
        with self._sessions_lock:
            sess = self.sessions.get(session_id)
            if sess is None:
                sess = Session(session_id=session_id or uuid.uuid4().hex[:12])
                self.sessions[sess.session_id] = sess
            return sess

    def log_event(self, event: dict) -> None:
        if self.annotation_log is None:
            return
        with self._log_lock:
            with self.annotation_log.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(event, sort_keys=True) + "\n")
            self._events_since_snapshot += 1
            if self._events_since_snapshot >= 50:
                self.snapshot_sessions()

    def snapshot_sessions(self) -> None:
        if self.session_snapshot is None:
            return
        body = {
            sid: {
                "positives": sorted(s.positives),
                "negatives": sorted(s.negatives),
                "queries": sorted(s.queries),
            }
            for sid, s in self.sessions.items()
        }
        self.session_snapshot.write_text(json.dumps(body, indent=2, sort_keys=True), encoding="utf-8")
        self._events_since_snapshot = 0

    def blob_for(self, record_id: str) -> Optional[bytes]:
        if self.manifest is None:
            return None
        entry = self.manifest.get(record_id)
        if entry is None:
            return None
        path = Path(entry.uri)
        if self.blob_root is not None and not path.is_absolute():
            path = self.blob_root / path
        if not path.exists():
            return None
        return path.read_bytes()


_MODE_MAP = {
    "image": QueryMode.IMAGE,
    "multi": QueryMode.MULTI_IMAGE,
    "text": QueryMode.TEXT,
    "hybrid": QueryMode.HYBRID,
    "batch": QueryMode.BATCH,
}


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def _result_payload(rs: ResultSet) -> dict:
    return {
        "exact": rs.exact,
        "results": [e.to_dict() for e in rs.entries],
    }


def build_query(state: ServiceState, payload: SearchPayload) -> RetrievalQuery:
    mode = _MODE_MAP.get(payload.mode.lower())
    if mode is None:
        raise InvalidQuery(f"unknown mode {payload.mode!r}")
    seeds: list[EmbeddingVector] = []
    for rid in payload.seed_record_ids:
        if rid not in state.index:
            raise InvalidQuery(f"unknown seed record {rid!r}")
        seeds.append(state.index.vector(rid))
    for b64 in payload.seed_blobs_b64:
        seeds.append(state.gateway.embed_image(base64.b64decode(b64)))
    if payload.text:
        seeds.append(state.gateway.embed_text(payload.text))
    query = RetrievalQuery(
        mode=mode,
        seed_vectors=seeds,
        k=payload.k,
        hybrid_alpha=payload.alpha,
        diversity_clusters=payload.diversity_clusters,
        candidate_multiplier=payload.candidate_multiplier,
    )
    query.validate()
    return query


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="imgcurate service", version="0.1.0")
    app.state.curation = state

    @app.exception_handler(CurationError)
    async def _curation_error(_req: Request, exc: CurationError):
        status = 400
        if isinstance(exc, (IndexNotBuilt, EmptyIndex)):
            status = 503
        elif isinstance(exc, UnknownQuery):
            status = 404
        return _error(status, type(exc).__name__, str(exc))

    @app.post("/v1/search")
    def search(payload: SearchPayload):
        query = build_query(state, payload)
        sess = state.session(payload.session_id)
        if query.mode == QueryMode.BATCH:
            subqueries = expand_batch(query)
            outcomes = state.index.batch_search(subqueries, exact=not payload.use_ann)
            batches = []
            for out in outcomes:
                if isinstance(out, Exception):
                    batches.append({"error": {"code": type(out).__name__, "message": str(out)}})
                else:
                    batches.append(_result_payload(out))
            with sess.lock:
                query_id = f"q{next(sess.counter)}"
                sess.queries[query_id] = StoredQuery(query=query, result_ids=[])
            return {"session_id": sess.session_id, "query_id": query_id, "batch": batches}

        rs = state.index.search(query, exact=not payload.use_ann)
        with sess.lock:
            query_id = f"q{next(sess.counter)}"
            sess.queries[query_id] = StoredQuery(query=query, result_ids=rs.record_ids())
        return {
            "session_id": sess.session_id,
            "query_id": query_id,
            **_result_payload(rs),
        }

    @app.post("/v1/annotations")
    def annotate(payload: AnnotationPayload):
        if payload.label not in (LABEL_POSITIVE, LABEL_NEGATIVE):
            return _error(400, "InvalidLabel", f"label must be {LABEL_POSITIVE} or {LABEL_NEGATIVE}")
        sess = state.session(payload.session_id)
        with sess.lock:
            if payload.query_id not in sess.queries:
                return _error(404, "UnknownQuery", f"no query {payload.query_id!r} in session")
            sess.positives.discard(payload.record_id)
            sess.negatives.discard(payload.record_id)
            if payload.label == LABEL_POSITIVE:
                sess.positives.add(payload.record_id)
            else:
                sess.negatives.add(payload.record_id)
            positives, negatives = len(sess.positives), len(sess.negatives)
        state.log_event(
            {
                "session_id": sess.session_id,
                "query_id": payload.query_id,
                "record_id": payload.record_id,
                "label": payload.label,
            }
        )
        return {"status": "ok", "positives": positives, "negatives": negatives}

    @app.post("/v1/sessions/{session_id}/refine")
    def refine(session_id: str, payload: RefinePayload):
        sess = state.session(session_id)
        with sess.lock:
            if not sess.positives:
                raise NoPositives("session has no positive annotations")
            positives = sorted(sess.positives)
            negatives = frozenset(sess.negatives)
        seeds = [state.index.vector(rid) for rid in positives if rid in state.index]
        if not seeds:
            raise NoPositives("no positive record has a stored vector")
        mode = QueryMode.MULTI_IMAGE if len(seeds) >= 2 else QueryMode.IMAGE
        query = RetrievalQuery(
            mode=mode,
            seed_vectors=seeds,
            k=payload.k,
            diversity_clusters=payload.diversity_clusters,
            exclude_ids=negatives,
        )
        query.validate()
        rs = state.index.search(query, exact=not payload.use_ann)
        qvec = aggregate_multi(seeds) if len(seeds) >= 2 else seeds[0]
        with sess.lock:
            query_id = f"q{next(sess.counter)}"
            sess.queries[query_id] = StoredQuery(query=query, result_ids=rs.record_ids())
        return {
            "session_id": sess.session_id,
            "query_id": query_id,
            "query_vector": [float(x) for x in qvec.values],
            "excluded": sorted(negatives),
            **_result_payload(rs),
        }

    @app.post("/v1/filter-runs")
    def trigger_filter_run(payload: FilterRunPayload):
        if payload.stage not in state.profiles:
            return _error(400, "UnknownStage", f"no profile for stage {payload.stage!r}")
        manifest_path = Path(payload.manifest)
        if not manifest_path.exists():
            return _error(400, "ManifestNotFound", f"manifest {payload.manifest!r} not readable")
        with state._runs_lock:
            for run in state.runs.values():
                if (
                    run.manifest_ref == payload.manifest
                    and run.stage == payload.stage
                    and run.status in (RUN_PENDING, RUN_RUNNING)
                ):
                    return _error(409, "DuplicateRun", f"run {run.run_id} already in flight")
            run = FilterRun(run_id=uuid.uuid4().hex[:12], manifest_ref=payload.manifest, stage=payload.stage)
            state.runs[run.run_id] = run

        def execute() -> None:
            run.status = RUN_RUNNING
            try:
                manifest = Manifest.read(manifest_path)
                root = state.blob_root or manifest_path.parent

                def loader(uri: str) -> bytes:
                    p = Path(uri)
                    if not p.is_absolute():
                        p = root / p
                    return p.read_bytes()

                _, report = run_filter_pass(
                    manifest, state.profiles[payload.stage], state.providers, loader
                )
                run.report = report
                state.latest_report = report
                run.status = RUN_DONE
            except Exception as exc:  # noqa: BLE001 - surfaced through run status
                run.error = str(exc)
                run.status = RUN_FAILED

        state.executor.submit(execute)
        return {"run_id": run.run_id, "status": run.status}

    @app.get("/v1/filter-runs/{run_id}")
    def poll_run(run_id: str):
        run = state.runs.get(run_id)
        if run is None:
            return _error(404, "UnknownRun", f"no run {run_id!r}")
        body = {"run_id": run.run_id, "status": run.status, "stage": run.stage}
        if run.status == RUN_DONE and run.report is not None:
            body["report"] = run.report.to_dict()
        if run.status == RUN_FAILED:
            body["error"] = run.error
        return body

    @app.get("/v1/stats")
    def stats():
        report = state.latest_report
        if report is None:
            return _error(404, "NoStats", "no completed filter run yet")
        return {
            "stage": report.stage,
            "total": report.total,
            "passed": report.passed,
            "failed": report.failed,
            "histograms": report.histograms(),
        }

    @app.get("/v1/records/{record_id:path}/thumbnail")
    def thumbnail(record_id: str):
        blob = state.blob_for(record_id)
        if blob is None:
            return _error(404, "UnknownRecord", f"no blob for {record_id!r}")
        try:
            with Image.open(io.BytesIO(blob)) as im:
                im = im.convert("RGB")
                im.thumbnail((THUMBNAIL_EDGE, THUMBNAIL_EDGE))
                buf = io.BytesIO()
                im.save(buf, format="PNG")
        except OSError:
            return _error(404, "UndecodableRecord", f"cannot decode {record_id!r}")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "index_size": len(state.index)}

    return app
