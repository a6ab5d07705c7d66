"""Static JSON configuration for the CLI and service.

One file configures everything: corpus root, index location, provider
endpoints, stage threshold profiles, sampling knobs and the master seed.
Flags override file values; the CURATION_CONFIG environment variable names
a fallback config path.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .embeddings import (
    EmbeddingCache,
    EmbeddingGateway,
    RemoteEmbeddingProvider,
    StubEmbeddingProvider,
)
from .errors import ConfigError
from .scorers import RemoteScorer, ScorerProviderSet, StubScorer
from .taxonomy import SchemaTable
from .thresholds import DEFAULT_PROFILES, ThresholdProfile, validate_profiles

CONFIG_ENV_VAR = "CURATION_CONFIG"


@dataclass
class CliConfig:
    corpus_root: Path = Path(".")
    index_path: Path = Path("index")
    cache_path: Optional[Path] = None
    seed: int = 1234
    embedding: dict = field(default_factory=lambda: {"kind": "stub", "dim": 512})
    scorers: dict = field(default_factory=lambda: {
        "authenticity": {"kind": "stub"},
        "watermark": {"kind": "stub"},
        "greasy": {"kind": "stub"},
    })
    thresholds: dict[str, ThresholdProfile] = field(default_factory=lambda: dict(DEFAULT_PROFILES))
    upweights: dict[str, float] = field(default_factory=dict)
    flatten_strength: float = 0.5
    dedup_threshold: float = 0.92
    schema_table_path: Optional[Path] = None
    webp: bool = False
    annotation_log: Optional[Path] = None

    @classmethod
    def load(cls, path: Optional[str | Path] = None) -> "CliConfig":
        if path is None:
            env = os.environ.get(CONFIG_ENV_VAR)
            if env:
                path = env
        if path is None:
            return cls()
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            obj = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(obj, base_dir=p.parent)

    @classmethod
    def from_dict(cls, obj: dict, base_dir: Path = Path(".")) -> "CliConfig":
        def resolve(value: Optional[str]) -> Optional[Path]:
            if value is None:
                return None
            path = Path(value)
            return path if path.is_absolute() else base_dir / path

        cfg = cls()
        if "corpus_root" in obj:
            cfg.corpus_root = resolve(obj["corpus_root"])
        if "index_path" in obj:
            cfg.index_path = resolve(obj["index_path"])
        if "cache_path" in obj:
            cfg.cache_path = resolve(obj["cache_path"])
        cfg.seed = int(obj.get("seed", cfg.seed))
        cfg.embedding = dict(obj.get("embedding", cfg.embedding))
        cfg.scorers = dict(obj.get("scorers", cfg.scorers))
        if "thresholds" in obj:
            cfg.thresholds = {
                stage: ThresholdProfile.from_dict(stage, body)
                for stage, body in obj["thresholds"].items()
            }
            validate_profiles(cfg.thresholds)
        sampling = obj.get("sampling", {})
        cfg.upweights = {k: float(v) for k, v in sampling.get("upweights", {}).items()}
        cfg.flatten_strength = float(sampling.get("flatten_strength", cfg.flatten_strength))
        cfg.dedup_threshold = float(obj.get("dedup_threshold", cfg.dedup_threshold))
        if "schema_table" in obj and obj["schema_table"]:
            cfg.schema_table_path = resolve(obj["schema_table"])
            if not cfg.schema_table_path.exists():
                raise ConfigError(f"schema table not found: {cfg.schema_table_path}")
        cfg.webp = bool(obj.get("webp", False))
        if obj.get("annotation_log"):
            cfg.annotation_log = resolve(obj["annotation_log"])
        if not cfg.corpus_root.exists():
            raise ConfigError(f"corpus root not found: {cfg.corpus_root}")
        return cfg

    def build_gateway(self) -> EmbeddingGateway:
        kind = self.embedding.get("kind", "stub")
        dim = int(self.embedding.get("dim", 512))
        if kind == "stub":
            provider = StubEmbeddingProvider(dim=dim)
        elif kind == "remote":
            url = self.embedding.get("url")
            if not url:
                raise ConfigError("remote embedding provider needs a url")
            provider = RemoteEmbeddingProvider(url=url, dim=dim)
        else:
            raise ConfigError(f"unknown embedding provider kind {kind!r}")
        cache = EmbeddingCache(self.cache_path) if self.cache_path else EmbeddingCache()
        return EmbeddingGateway(provider, cache, allow_webp=self.webp)

    def build_scorers(self) -> ScorerProviderSet:
        def build(slot: str):
            body = self.scorers.get(slot)
            if not body:
                return None
            kind = body.get("kind", "stub")
            if kind == "stub":
                return StubScorer(slot)
            if kind == "remote":
                url = body.get("url")
                if not url:
                    raise ConfigError(f"remote scorer {slot!r} needs a url")
                return RemoteScorer(url)
            if kind == "none":
                return None
            raise ConfigError(f"unknown scorer kind {kind!r} for {slot!r}")

        return ScorerProviderSet(
            authenticity=build("authenticity"),
            watermark=build("watermark"),
            greasy=build("greasy"),
        )

    def build_schema_table(self) -> SchemaTable:
        if self.schema_table_path:
            return SchemaTable.from_file(self.schema_table_path)
        return SchemaTable()

    def blob_loader(self):
        root = self.corpus_root

        def loader(uri: str) -> bytes:
            path = Path(uri)
            if not path.is_absolute():
                path = root / path
            return path.read_bytes()

        return loader
