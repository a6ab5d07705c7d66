"""Embedding gateway: stub determinism, caching, cosine, remote protocol."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from imgcurate.embeddings import (
    EmbeddingCache,
    EmbeddingGateway,
    EmbeddingVector,
    RemoteEmbeddingProvider,
    StubEmbeddingProvider,
    cosine,
    normalize,
)
from imgcurate.errors import DecodeFailure, DimensionMismatch, EmptyText, ProviderUnavailable


def unit(values, modality="IMAGE"):
    return EmbeddingVector(values=normalize(np.asarray(values, dtype=np.float32)),
                           modality=modality, provider_id="test")


class TestStubProvider:
    def test_unit_norm(self):
        vec = StubEmbeddingProvider(dim=128).embed_image(b"pixels")
        assert abs(np.linalg.norm(vec) - 1.0) < 1e-6

    def test_reproducible(self):
        a = StubEmbeddingProvider(dim=64).embed_image(b"blob")
        b = StubEmbeddingProvider(dim=64).embed_image(b"blob")
        assert np.array_equal(a, b)

    def test_text_and_image_spaces_differ(self):
        p = StubEmbeddingProvider(dim=64)
        img = p.embed_image(b"red car")
        txt = p.embed_text("red car")
        assert not np.array_equal(img, txt)

    def test_text_deterministic(self):
        p = StubEmbeddingProvider(dim=32)
        assert np.array_equal(p.embed_text("red car"), p.embed_text("red car"))


class TestGateway:
    def test_cache_hit_same_vector(self):
        gw = EmbeddingGateway(StubEmbeddingProvider(dim=48), validate_images=False)
        a = gw.embed_image(b"same blob")
        b = gw.embed_image(b"same blob")
        assert np.array_equal(a.values, b.values)
        assert len(gw.cache) == 1

    def test_empty_text_rejected(self):
        gw = EmbeddingGateway(StubEmbeddingProvider(dim=16))
        with pytest.raises(EmptyText):
            gw.embed_text("")

    def test_empty_blob_rejected(self):
        gw = EmbeddingGateway(StubEmbeddingProvider(dim=16))
        with pytest.raises(DecodeFailure):
            gw.embed_image(b"")

    def test_corrupt_blob_rejected(self):
        gw = EmbeddingGateway(StubEmbeddingProvider(dim=16))
        with pytest.raises(DecodeFailure):
            gw.embed_image(b"not an image at all")

    def test_real_image_accepted_with_validation(self):
        from conftest import encode_png, noise_image
        gw = EmbeddingGateway(StubEmbeddingProvider(dim=16))
        vec = gw.embed_image(encode_png(noise_image(8, 8, seed=1)))
        assert abs(np.linalg.norm(vec.values) - 1.0) < 1e-6

    def test_cache_file_roundtrip(self, tmp_path):
        path = tmp_path / "cache.json"
        gw = EmbeddingGateway(StubEmbeddingProvider(dim=32), EmbeddingCache(path),
                              validate_images=False)
        original = gw.embed_image(b"payload")
        gw.cache.save()

        class Exploder:
            provider_id = "boom"
            dim = 32

            def embed_image(self, blob):
                raise AssertionError("cache should have answered")

            def embed_text(self, text):
                raise AssertionError("cache should have answered")

        gw2 = EmbeddingGateway(Exploder(), EmbeddingCache(path), validate_images=False)
        reloaded = gw2.embed_image(b"payload")
        assert np.array_equal(original.values, reloaded.values)


class TestCosine:
    def test_identity(self):
        v = unit([0.2, -0.4, 0.1])
        assert cosine(v, v) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine(unit([1, 0]), unit([0, 1])) == pytest.approx(0.0)

    def test_forced_value(self):
        assert cosine(unit([1, 0]), unit([0.7071, 0.7071])) == pytest.approx(0.7071, abs=1e-4)

    def test_symmetry(self):
        a, b = unit([0.3, 0.5, -0.2]), unit([-0.1, 0.9, 0.4])
        assert cosine(a, b) == cosine(b, a)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cosine(unit([1, 0]), unit([1, 0, 0]))


class _EmbedHandler(BaseHTTPRequestHandler):
    fail = False

    def do_POST(self):
        if self.fail:
            self.send_response(500)
            self.end_headers()
            return
        length = int(self.headers["Content-Length"])
        json.loads(self.rfile.read(length))
        body = json.dumps({"dim": 8, "values": [1, 0, 0, 0, 0, 0, 0, 0]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def embed_server():
    server = HTTPServer(("127.0.0.1", 0), _EmbedHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


class TestRemoteProvider:
    def test_happy_path(self, embed_server):
        provider = RemoteEmbeddingProvider(url=embed_server, dim=8)
        vec = provider.embed_text("hello")
        assert vec.shape == (8,)
        assert abs(np.linalg.norm(vec) - 1.0) < 1e-6

    def test_server_error_maps_to_unavailable(self, embed_server):
        _EmbedHandler.fail = True
        try:
            provider = RemoteEmbeddingProvider(url=embed_server, dim=8)
            with pytest.raises(ProviderUnavailable):
                provider.embed_text("hello")
        finally:
            _EmbedHandler.fail = False

    def test_connection_refused(self):
        provider = RemoteEmbeddingProvider(url="http://127.0.0.1:1", dim=8, timeout=0.5)
        with pytest.raises(ProviderUnavailable):
            provider.embed_image(b"blob")

    def test_dim_mismatch_rejected(self, embed_server):
        provider = RemoteEmbeddingProvider(url=embed_server, dim=16)
        with pytest.raises(ProviderUnavailable):
            provider.embed_text("hello")
