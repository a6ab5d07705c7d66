"""HTTP service: search parity, annotation semantics, runs, stats, thumbnails."""

from __future__ import annotations

import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from imgcurate.embeddings import EmbeddingGateway, StubEmbeddingProvider
from imgcurate.index import QueryMode, RetrievalQuery, VectorIndex
from imgcurate.records import Manifest, ManifestEntry
from imgcurate.service import ServiceState, create_app

from conftest import encode_png, photo_like_image

DIM = 32


@pytest.fixture
def world(tmp_path):
    """A tiny corpus on disk, indexed and served."""
    gateway = EmbeddingGateway(StubEmbeddingProvider(dim=DIM))
    index = VectorIndex(dim=DIM, seed=1)
    blob_dir = tmp_path / "blobs"
    blob_dir.mkdir()
    entries = []
    for i in range(24):
        blob = encode_png(photo_like_image(48, 48, seed=100 + i))
        path = blob_dir / f"r{i:02d}.png"
        path.write_bytes(blob)
        index.insert(f"r{i:02d}", gateway.embed_image(blob))
        entries.append(ManifestEntry(record_id=f"r{i:02d}", uri=str(path), task="T2I", category="alpha"))
    manifest = Manifest.from_entries(entries)
    manifest_path = tmp_path / "manifest.jsonl"
    manifest.write(manifest_path)
    state = ServiceState(
        index=index,
        gateway=gateway,
        manifest=manifest,
        annotation_log=tmp_path / "events.jsonl",
        session_snapshot=tmp_path / "sessions.json",
    )
    client = TestClient(create_app(state))
    return client, state, manifest_path


def search_by_record(client, rid, k=8, session="s1"):
    resp = client.post("/v1/search", json={
        "session_id": session, "mode": "image", "seed_record_ids": [rid], "k": k,
    })
    assert resp.status_code == 200, resp.text
    return resp.json()


class TestSearch:
    def test_matches_direct_library_call(self, world):
        client, state, _ = world
        body = search_by_record(client, "r03")
        query = RetrievalQuery(mode=QueryMode.IMAGE, seed_vectors=[state.index.vector("r03")], k=8)
        direct = state.index.search(query)
        got = [(e["record_id"], pytest.approx(e["similarity"])) for e in body["results"]]
        want = [(e.record_id, pytest.approx(e.similarity)) for e in direct.entries]
        assert [g[0] for g in got] == [w[0] for w in want]
        assert body["exact"] is True

    def test_multi_image_single_seed_is_400(self, world):
        client, _, _ = world
        resp = client.post("/v1/search", json={
            "mode": "multi", "seed_record_ids": ["r01"], "k": 5,
        })
        assert resp.status_code == 400
        assert resp.json()["code"] == "InvalidQuery"

    def test_unknown_session_auto_created(self, world):
        client, state, _ = world
        body = search_by_record(client, "r00", session="fresh-session")
        assert body["session_id"] == "fresh-session"
        assert "fresh-session" in state.sessions

    def test_text_mode(self, world):
        client, _, _ = world
        resp = client.post("/v1/search", json={"mode": "text", "text": "red car", "k": 4})
        assert resp.status_code == 200
        assert len(resp.json()["results"]) == 4

    def test_hybrid_mode(self, world):
        client, _, _ = world
        resp = client.post("/v1/search", json={
            "mode": "hybrid", "seed_record_ids": ["r05"], "text": "red car", "k": 4, "alpha": 0.6,
        })
        assert resp.status_code == 200

    def test_batch_mode(self, world):
        client, _, _ = world
        resp = client.post("/v1/search", json={
            "mode": "batch", "seed_record_ids": ["r01", "r02", "r03"], "k": 3,
        })
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["batch"]) == 3
        assert all(len(b["results"]) == 3 for b in body["batch"])

    def test_diversity_clusters_assigns_badges(self, world):
        client, _, _ = world
        resp = client.post("/v1/search", json={
            "mode": "image", "seed_record_ids": ["r01"], "k": 6, "diversity_clusters": 3,
        })
        assert resp.status_code == 200
        assert all(e["cluster_id"] is not None for e in resp.json()["results"])


class TestAnnotations:
    def test_relabel_moves_between_sets(self, world):
        client, state, _ = world
        body = search_by_record(client, "r02")
        qid = body["query_id"]
        event = {"session_id": "s1", "query_id": qid, "record_id": "r05", "label": "POSITIVE"}
        assert client.post("/v1/annotations", json=event).status_code == 200
        event["label"] = "NEGATIVE"
        assert client.post("/v1/annotations", json=event).status_code == 200
        sess = state.sessions["s1"]
        assert "r05" in sess.negatives
        assert "r05" not in sess.positives

    def test_duplicate_events_idempotent(self, world):
        client, state, _ = world
        qid = search_by_record(client, "r02")["query_id"]
        event = {"session_id": "s1", "query_id": qid, "record_id": "r06", "label": "POSITIVE"}
        for _ in range(3):
            resp = client.post("/v1/annotations", json=event)
            assert resp.json()["positives"] == 1

    def test_unknown_query_404(self, world):
        client, _, _ = world
        search_by_record(client, "r02")
        resp = client.post("/v1/annotations", json={
            "session_id": "s1", "query_id": "nope", "record_id": "r06", "label": "POSITIVE",
        })
        assert resp.status_code == 404

    def test_sets_stay_disjoint(self, world):
        client, state, _ = world
        qid = search_by_record(client, "r02")["query_id"]
        for rid, label in (("r01", "POSITIVE"), ("r02", "NEGATIVE"), ("r01", "NEGATIVE"),
                           ("r02", "POSITIVE"), ("r03", "POSITIVE")):
            client.post("/v1/annotations", json={
                "session_id": "s1", "query_id": qid, "record_id": rid, "label": label,
            })
        sess = state.sessions["s1"]
        assert not (sess.positives & sess.negatives)

    def test_events_logged(self, world):
        client, state, _ = world
        qid = search_by_record(client, "r02")["query_id"]
        client.post("/v1/annotations", json={
            "session_id": "s1", "query_id": qid, "record_id": "r01", "label": "POSITIVE",
        })
        assert state.annotation_log.exists()
        assert "r01" in state.annotation_log.read_text()


class TestRefine:
    def test_refine_excludes_negatives(self, world):
        client, state, _ = world
        body = search_by_record(client, "r02", k=10)
        qid = body["query_id"]
        negative = body["results"][0]["record_id"]
        positives = [body["results"][1]["record_id"], body["results"][2]["record_id"]]
        for rid in positives:
            client.post("/v1/annotations", json={
                "session_id": "s1", "query_id": qid, "record_id": rid, "label": "POSITIVE",
            })
        client.post("/v1/annotations", json={
            "session_id": "s1", "query_id": qid, "record_id": negative, "label": "NEGATIVE",
        })
        resp = client.post("/v1/sessions/s1/refine", json={"k": 10})
        assert resp.status_code == 200
        refined = resp.json()
        assert negative not in [e["record_id"] for e in refined["results"]]
        # refined query vector is the normalized centroid of the positives
        vecs = np.stack([state.index.vector(r).values for r in sorted(positives)])
        centroid = vecs.mean(axis=0)
        centroid /= np.linalg.norm(centroid)
        assert np.allclose(refined["query_vector"], centroid, atol=1e-6)

    def test_single_positive_uses_its_vector(self, world):
        client, state, _ = world
        qid = search_by_record(client, "r07")["query_id"]
        client.post("/v1/annotations", json={
            "session_id": "s1", "query_id": qid, "record_id": "r09", "label": "POSITIVE",
        })
        resp = client.post("/v1/sessions/s1/refine", json={"k": 5})
        assert resp.status_code == 200
        vec = state.index.vector("r09").values
        assert np.allclose(resp.json()["query_vector"], vec, atol=1e-6)
        assert resp.json()["results"][0]["record_id"] == "r09"

    def test_refine_without_positives_is_error(self, world):
        client, _, _ = world
        search_by_record(client, "r01")
        resp = client.post("/v1/sessions/s1/refine", json={"k": 5})
        assert resp.status_code == 400
        assert resp.json()["code"] == "NoPositives"


class TestFilterRuns:
    def test_run_lifecycle(self, world):
        client, _, manifest_path = world
        resp = client.post("/v1/filter-runs", json={"manifest": str(manifest_path), "stage": "PT"})
        assert resp.status_code == 200
        run_id = resp.json()["run_id"]
        for _ in range(100):
            body = client.get(f"/v1/filter-runs/{run_id}").json()
            if body["status"] in ("DONE", "FAILED"):
                break
            time.sleep(0.05)
        assert body["status"] == "DONE"
        assert body["report"]["total"] == 24

    def test_poll_unknown_404(self, world):
        client, _, _ = world
        assert client.get("/v1/filter-runs/missing").status_code == 404

    def test_duplicate_trigger_409(self, world):
        client, state, manifest_path = world
        # stall the worker pool so the first run stays in flight
        import threading
        gate = threading.Event()
        state.executor.submit(gate.wait)
        state.executor.submit(gate.wait)
        first = client.post("/v1/filter-runs", json={"manifest": str(manifest_path), "stage": "CT"})
        assert first.status_code == 200
        second = client.post("/v1/filter-runs", json={"manifest": str(manifest_path), "stage": "CT"})
        assert second.status_code == 409
        gate.set()

    def test_stats_after_run(self, world):
        client, _, manifest_path = world
        run_id = client.post(
            "/v1/filter-runs", json={"manifest": str(manifest_path), "stage": "PT"}
        ).json()["run_id"]
        for _ in range(100):
            if client.get(f"/v1/filter-runs/{run_id}").json()["status"] == "DONE":
                break
            time.sleep(0.05)
        stats = client.get("/v1/stats")
        assert stats.status_code == 200
        hists = stats.json()["histograms"]
        assert "edge_variance" in hists
        assert sum(hists["edge_variance"]["counts"]) > 0

    def test_stats_before_any_run_404(self, world):
        client, _, _ = world
        assert client.get("/v1/stats").status_code == 404


class TestThumbnails:
    def test_png_thumbnail(self, world):
        client, _, _ = world
        resp = client.get("/v1/records/r00/thumbnail")
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "image/png"
        assert resp.content[:8] == b"\x89PNG\r\n\x1a\n"

    def test_unknown_record_404(self, world):
        client, _, _ = world
        assert client.get("/v1/records/zzz/thumbnail").status_code == 404

    def test_record_id_with_slashes(self, tmp_path):
        from imgcurate.embeddings import EmbeddingGateway, StubEmbeddingProvider
        gateway = EmbeddingGateway(StubEmbeddingProvider(dim=DIM))
        index = VectorIndex(dim=DIM)
        blob = encode_png(photo_like_image(32, 32, seed=1))
        path = tmp_path / "img.png"
        path.write_bytes(blob)
        index.insert("T2I/alpha/img.png", gateway.embed_image(blob))
        manifest = Manifest.from_entries(
            [ManifestEntry(record_id="T2I/alpha/img.png", uri=str(path))]
        )
        client = TestClient(create_app(ServiceState(index=index, gateway=gateway, manifest=manifest)))
        resp = client.get("/v1/records/T2I/alpha/img.png/thumbnail")
        assert resp.status_code == 200
        assert resp.content[:8] == b"\x89PNG\r\n\x1a\n"
