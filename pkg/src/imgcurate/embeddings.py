"""Embedding gateway: uniform access to image/text embedders.

Vectors leaving the gateway are always unit-norm float32. A deterministic
stub provider (digest expansion) powers tests and offline runs; remote
providers are reached over HTTP. Results are cached by content digest, so
identical content never hits a provider twice.
"""

from __future__ import annotations

import base64
import hashlib
import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

import httpx
import numpy as np

from .errors import (
    DecodeFailure,
    DimensionMismatch,
    EmptyText,
    ProviderUnavailable,
)

MODALITY_IMAGE = "IMAGE"
MODALITY_TEXT = "TEXT"

UNIT_NORM_TOL = 1e-6


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    modality: str
    provider_id: str

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float32)
        object.__setattr__(self, "values", v)
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"vector norm {norm} deviates from 1 beyond {UNIT_NORM_TOL}")

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def normalize(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.float32)
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        raise ValueError("cannot normalize a near-zero vector")
    return (v / norm).astype(np.float32)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Dot product of unit vectors, clipped into [-1, 1]."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"{a.dim} != {b.dim}")
    return float(np.clip(np.dot(a.values, b.values), -1.0, 1.0))


class EmbeddingProvider(Protocol):
    provider_id: str
    dim: int

    def embed_image(self, blob: bytes) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


def _expand_digest(digest: bytes, dim: int) -> np.ndarray:
    """Counter-mode expansion of a digest into ``dim`` floats in [-1, 1).

    Pure hashing, so the output is identical across platforms and processes.
    """
    blocks = (dim * 8 + 31) // 32
    raw = b"".join(
        hashlib.sha256(digest + counter.to_bytes(4, "big")).digest()
        for counter in range(blocks)
    )
    words = np.frombuffer(raw, dtype=">u8")[:dim].astype(np.float64)
    return (words / float(1 << 64)) * 2.0 - 1.0


class StubEmbeddingProvider:
    """Hash-expansion embedder; a joint image/text space of dimension ``dim``."""

    def __init__(self, dim: int = 512, provider_id: str = "stub"):
        self.dim = dim
        self.provider_id = provider_id

    def embed_image(self, blob: bytes) -> np.ndarray:
        digest = hashlib.sha256(b"img\x00" + blob).digest()
        return normalize(_expand_digest(digest, self.dim))

    def embed_text(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(b"txt\x00" + text.encode("utf-8")).digest()
        return normalize(_expand_digest(digest, self.dim))


class RemoteEmbeddingProvider:
    """HTTP embedder: POST base64 content, expect ``{"dim": D, "values": [...]}``."""

    def __init__(self, url: str, dim: int, provider_id: str = "remote", timeout: float = 30.0):
        self.url = url
        self.dim = dim
        self.provider_id = provider_id
        self.timeout = timeout

    def _call(self, payload: dict) -> np.ndarray:
        try:
            resp = httpx.post(self.url, json=payload, timeout=self.timeout)
            resp.raise_for_status()
            body = resp.json()
            values = np.asarray(body["values"], dtype=np.float32)
            declared = int(body["dim"])
        except (httpx.HTTPError, KeyError, ValueError, TypeError) as exc:
            raise ProviderUnavailable(f"embedder at {self.url} failed: {exc}") from exc
        if declared != self.dim or values.shape != (self.dim,):
            raise ProviderUnavailable(
                f"embedder at {self.url} returned dim {declared}, expected {self.dim}"
            )
        return normalize(values)

    def embed_image(self, blob: bytes) -> np.ndarray:
        return self._call({"modality": "image", "content_b64": base64.b64encode(blob).decode("ascii")})

    def embed_text(self, text: str) -> np.ndarray:
        return self._call({"modality": "text", "text": text})


class EmbeddingCache:
    """Content-addressed vector cache with optional file persistence.

    Writes are atomic per key; identical content always maps to the same
    vector, so last-write-wins is harmless.
    """

    def __init__(self, path: Optional[str | Path] = None):
        self._entries: dict[str, dict] = {}
        self._lock = threading.Lock()
        self.path = Path(path) if path else None
        if self.path and self.path.exists():
            self._entries = json.loads(self.path.read_text(encoding="utf-8"))

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> Optional[EmbeddingVector]:
        entry = self._entries.get(key)
        if entry is None:
            return None
        return EmbeddingVector(
            values=np.asarray(entry["values"], dtype=np.float32),
            modality=entry["modality"],
            provider_id=entry["provider_id"],
        )

    def put(self, key: str, vector: EmbeddingVector) -> None:
        entry = {
            "values": [float(x) for x in vector.values],
            "modality": vector.modality,
            "provider_id": vector.provider_id,
            "created_at": time.time(),
        }
        with self._lock:
            self._entries[key] = entry

    def save(self, path: Optional[str | Path] = None) -> None:
        target = Path(path) if path else self.path
        if target is None:
            raise ValueError("no cache path configured")
        with self._lock:
            target.write_text(json.dumps(self._entries), encoding="utf-8")


def content_key(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class EmbeddingGateway:
    """Front door for embeddings: normalization, caching, provider dispatch.

    Image blobs are checked against the container header before any
    provider call, so corrupt input fails as DecodeFailure here rather
    than as an opaque provider error. Pass ``validate_images=False`` for
    providers that embed arbitrary bytes.
    """

    def __init__(
        self,
        provider: EmbeddingProvider,
        cache: Optional[EmbeddingCache] = None,
        *,
        validate_images: bool = True,
        allow_webp: bool = False,
    ):
        self.provider = provider
        self.cache = cache if cache is not None else EmbeddingCache()
        self.validate_images = validate_images
        self.allow_webp = allow_webp

    @property
    def dim(self) -> int:
        return self.provider.dim

    def embed_image(self, blob: bytes) -> EmbeddingVector:
        if not blob:
            raise DecodeFailure("empty image blob")
        if self.validate_images:
            from .imgio import decode_metadata

            try:
                decode_metadata(blob, allow_webp=self.allow_webp)
            except Exception as exc:
                raise DecodeFailure(f"blob is not a decodable image: {exc}") from exc
        key = "img:" + content_key(blob)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        values = self.provider.embed_image(blob)
        vec = EmbeddingVector(values=values, modality=MODALITY_IMAGE, provider_id=self.provider.provider_id)
        self.cache.put(key, vec)
        return vec

    def embed_text(self, text: str) -> EmbeddingVector:
        if not text:
            raise EmptyText("empty query text")
        key = "txt:" + content_key(text.encode("utf-8"))
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        values = self.provider.embed_text(text)
        vec = EmbeddingVector(values=values, modality=MODALITY_TEXT, provider_id=self.provider.provider_id)
        self.cache.put(key, vec)
        return vec
