"""Record and manifest primitives that flow between pipeline stages.

A manifest is an ordered, line-delimited JSON listing with an optional
``#manifest-v1`` header line carrying provenance metadata. Record ids are
unique within a manifest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .errors import ManifestError

MANIFEST_HEADER_TAG = "#manifest-v1"


@dataclass
class ImageRecord:
    """One curated image: identity, blob bytes and provenance."""

    record_id: str
    blob: bytes
    source: str = ""

    @classmethod
    def from_path(cls, record_id: str, path: str | Path, source: str = "") -> "ImageRecord":
        data = Path(path).read_bytes()
        return cls(record_id=record_id, blob=data, source=source or str(path))


@dataclass
class ManifestEntry:
    record_id: str
    uri: str
    task: str = ""
    category: str = ""
    decision: str = ""
    caption_version: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "ManifestEntry":
        obj = json.loads(line)
        return cls(
            record_id=obj["record_id"],
            uri=obj.get("uri", ""),
            task=obj.get("task", ""),
            category=obj.get("category", ""),
            decision=obj.get("decision", ""),
            caption_version=int(obj.get("caption_version", 0)),
        )


@dataclass
class Manifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for e in self.entries:
            if e.record_id in seen:
                raise ManifestError(f"duplicate record_id in manifest: {e.record_id}")
            seen.add(e.record_id)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def record_ids(self) -> list[str]:
        return [e.record_id for e in self.entries]

    def get(self, record_id: str) -> Optional[ManifestEntry]:
        for e in self.entries:
            if e.record_id == record_id:
                return e
        return None

    def category_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for e in self.entries:
            counts[e.category] = counts.get(e.category, 0) + 1
        return counts

    def task_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for e in self.entries:
            counts[e.task] = counts.get(e.task, 0) + 1
        return counts

    def dumps(self) -> str:
        lines = [f"{MANIFEST_HEADER_TAG} {json.dumps(self.metadata, sort_keys=True)}"]
        lines.extend(e.to_json() for e in self.entries)
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def from_entries(cls, entries: Iterable[ManifestEntry], metadata: Optional[dict] = None) -> "Manifest":
        return cls(entries=list(entries), metadata=dict(metadata or {}))

    @classmethod
    def loads(cls, text: str) -> "Manifest":
        metadata: dict = {}
        entries: list[ManifestEntry] = []
        for i, line in enumerate(text.splitlines()):
            line = line.strip()
            if not line:
                continue
            if i == 0 and line.startswith(MANIFEST_HEADER_TAG):
                payload = line[len(MANIFEST_HEADER_TAG):].strip()
                if payload:
                    try:
                        metadata = json.loads(payload)
                    except json.JSONDecodeError as exc:
                        raise ManifestError(f"bad manifest header: {exc}") from exc
                continue
            if line.startswith("#"):
                continue
            try:
                entries.append(ManifestEntry.from_json(line))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ManifestError(f"bad manifest line {i + 1}: {exc}") from exc
        return cls(entries=entries, metadata=metadata)

    @classmethod
    def read(cls, path: str | Path) -> "Manifest":
        p = Path(path)
        if not p.exists():
            raise ManifestError(f"manifest not found: {p}")
        return cls.loads(p.read_text(encoding="utf-8"))
