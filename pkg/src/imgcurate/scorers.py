"""Pluggable probability scorers: authenticity, watermark, greasy texture.

Real detectors live behind HTTP; the hash stub stands in for them in tests
and offline runs. Every scorer maps a record's bytes to a probability in
[0, 1] and must be safe to call from many workers.
"""

from __future__ import annotations

import base64
import hashlib
from dataclasses import dataclass, field
from typing import Optional, Protocol

import httpx

from .errors import ProviderUnavailable


class Scorer(Protocol):
    def score(self, record_id: str, blob: bytes) -> float:
        ...


class StubScorer:
    """Deterministic stand-in: uniform [0,1] value derived from a digest."""

    def __init__(self, kind: str):
        self.kind = kind

    def score(self, record_id: str, blob: bytes) -> float:
        digest = hashlib.sha256(self.kind.encode("utf-8") + b"\x00" + blob).digest()
        return int.from_bytes(digest[:8], "big") / float(1 << 64)


class RemoteScorer:
    """HTTP scorer client: POST base64 content, expect ``{"score": p}``."""

    def __init__(self, url: str, timeout: float = 10.0):
        self.url = url
        self.timeout = timeout

    def score(self, record_id: str, blob: bytes) -> float:
        payload = {"record_id": record_id, "content_b64": base64.b64encode(blob).decode("ascii")}
        try:
            resp = httpx.post(self.url, json=payload, timeout=self.timeout)
            resp.raise_for_status()
            value = float(resp.json()["score"])
        except (httpx.HTTPError, KeyError, ValueError, TypeError) as exc:
            raise ProviderUnavailable(f"scorer at {self.url} failed: {exc}") from exc
        if not 0.0 <= value <= 1.0:
            raise ProviderUnavailable(f"scorer at {self.url} returned out-of-range {value}")
        return value


@dataclass
class ScorerProviderSet:
    """The three plugin slots; any slot may be empty."""

    authenticity: Optional[Scorer] = None
    watermark: Optional[Scorer] = None
    greasy: Optional[Scorer] = None

    @classmethod
    def stub(cls) -> "ScorerProviderSet":
        return cls(
            authenticity=StubScorer("authenticity"),
            watermark=StubScorer("watermark"),
            greasy=StubScorer("greasy"),
        )

    @classmethod
    def none(cls) -> "ScorerProviderSet":
        return cls()
