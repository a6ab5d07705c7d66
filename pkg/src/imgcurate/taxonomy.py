"""Category routing, attribute schemas and structured caption management.

Every image belongs to exactly one of five primary categories, and each
category carries its own slice of a global 25-attribute pool (lighting for
photorealistic images, axis for charts, and so on). Captions are immutable
values: updates go through patches that produce a new, higher version, so
the history of a caption stays auditable.
"""

from __future__ import annotations

import enum
import json
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Protocol, Sequence

from .errors import (
    InvalidCaption,
    InvalidPatch,
    NoSignal,
    SchemaError,
    UnknownCategory,
    VersionConflict,
    WouldInvalidate,
)


class PrimaryCategory(str, enum.Enum):
    # Enumeration order is the documented tie-break order for routing.
    PHOTOREALISTIC = "PHOTOREALISTIC"
    NON_PHOTOREALISTIC = "NON_PHOTOREALISTIC"
    TEXT_CENTRIC = "TEXT_CENTRIC"
    CHART = "CHART"
    MULTI_IMAGE_COMPOSITION = "MULTI_IMAGE_COMPOSITION"


CATEGORY_ORDER = tuple(PrimaryCategory)

# Global pool of 25 attribute dimensions. The first six plus lighting and
# axis are fixed vocabulary; the rest are this toolkit's defaults and can be
# replaced wholesale through a schema configuration file.
ATTRIBUTE_POOL: tuple[str, ...] = (
    "global_semantics",
    "human_subjects",
    "objects_and_props",
    "background_environment",
    "spatial_layout",
    "visual_composition",
    "lighting",
    "color_palette",
    "artistic_style",
    "texture_detail",
    "camera_perspective",
    "depth_of_field",
    "mood_atmosphere",
    "time_of_day",
    "weather",
    "text_content",
    "typography",
    "text_layout",
    "language",
    "axis",
    "chart_type",
    "data_series",
    "legend",
    "panel_layout",
    "panel_relationship",
)

_DEFAULT_SCHEMAS: dict[PrimaryCategory, dict[str, list[str]]] = {
    PrimaryCategory.PHOTOREALISTIC: {
        "dimensions": [
            "global_semantics", "human_subjects", "objects_and_props",
            "background_environment", "spatial_layout", "visual_composition",
            "lighting", "color_palette", "texture_detail", "camera_perspective",
            "depth_of_field", "mood_atmosphere", "time_of_day", "weather",
        ],
        "required": ["global_semantics", "lighting"],
    },
    PrimaryCategory.NON_PHOTOREALISTIC: {
        "dimensions": [
            "global_semantics", "human_subjects", "objects_and_props",
            "background_environment", "spatial_layout", "visual_composition",
            "artistic_style", "color_palette", "texture_detail", "mood_atmosphere",
        ],
        "required": ["global_semantics", "artistic_style"],
    },
    PrimaryCategory.TEXT_CENTRIC: {
        "dimensions": [
            "global_semantics", "text_content", "typography", "text_layout",
            "language", "visual_composition", "color_palette", "background_environment",
        ],
        "required": ["global_semantics", "text_content"],
    },
    PrimaryCategory.CHART: {
        "dimensions": [
            "global_semantics", "chart_type", "axis", "data_series", "legend",
            "text_content", "color_palette", "spatial_layout",
        ],
        "required": ["global_semantics", "chart_type", "axis"],
    },
    PrimaryCategory.MULTI_IMAGE_COMPOSITION: {
        "dimensions": [
            "global_semantics", "panel_layout", "panel_relationship",
            "spatial_layout", "visual_composition", "objects_and_props", "color_palette",
        ],
        "required": ["global_semantics", "panel_layout"],
    },
}


@dataclass(frozen=True)
class AttributeSchema:
    category: PrimaryCategory
    dimensions: tuple[str, ...]
    required: tuple[str, ...]


class SchemaTable:
    """The five category schemas, validated against the attribute pool."""

    def __init__(
        self,
        pool: Sequence[str] = ATTRIBUTE_POOL,
        schemas: Optional[Mapping[PrimaryCategory, Mapping[str, Sequence[str]]]] = None,
    ):
        self.pool = tuple(pool)
        raw = schemas if schemas is not None else _DEFAULT_SCHEMAS
        self._schemas: dict[PrimaryCategory, AttributeSchema] = {}
        for cat in PrimaryCategory:
            if cat not in raw:
                raise SchemaError(f"schema table missing category {cat.value}")
            body = raw[cat]
            self._schemas[cat] = AttributeSchema(
                category=cat,
                dimensions=tuple(body["dimensions"]),
                required=tuple(body["required"]),
            )
        self._validate()

    def _validate(self) -> None:
        if len(self.pool) != 25:
            raise SchemaError(f"attribute pool must hold exactly 25 names, got {len(self.pool)}")
        if len(set(self.pool)) != len(self.pool):
            raise SchemaError("attribute pool contains duplicates")
        pool = set(self.pool)
        covered: set[str] = set()
        for schema in self._schemas.values():
            extra = set(schema.dimensions) - pool
            if extra:
                raise SchemaError(f"{schema.category.value} uses names outside the pool: {sorted(extra)}")
            if not set(schema.required) <= set(schema.dimensions):
                raise SchemaError(f"{schema.category.value} requires dimensions it does not declare")
            covered |= set(schema.dimensions)
        orphaned = pool - covered
        if orphaned:
            raise SchemaError(f"pool attributes not used by any category: {sorted(orphaned)}")
        if "lighting" not in self._schemas[PrimaryCategory.PHOTOREALISTIC].dimensions:
            raise SchemaError("PHOTOREALISTIC schema must include lighting")
        if "axis" not in self._schemas[PrimaryCategory.CHART].dimensions:
            raise SchemaError("CHART schema must include axis")

    def schema_for(self, category: PrimaryCategory | str) -> AttributeSchema:
        try:
            cat = PrimaryCategory(category)
        except ValueError as exc:
            raise UnknownCategory(f"unknown category {category!r}") from exc
        return self._schemas[cat]

    @classmethod
    def from_file(cls, path: str | Path) -> "SchemaTable":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        schemas = {}
        for name, body in obj.get("categories", {}).items():
            try:
                cat = PrimaryCategory(name)
            except ValueError as exc:
                raise SchemaError(f"unknown category in schema file: {name}") from exc
            schemas[cat] = body
        return cls(pool=obj.get("pool", ATTRIBUTE_POOL), schemas=schemas)

    def to_file(self, path: str | Path) -> None:
        obj = {
            "pool": list(self.pool),
            "categories": {
                cat.value: {
                    "dimensions": list(s.dimensions),
                    "required": list(s.required),
                }
                for cat, s in self._schemas.items()
            },
        }
        Path(path).write_text(json.dumps(obj, indent=2), encoding="utf-8")


DEFAULT_SCHEMA_TABLE = SchemaTable()


def attribute_schema(
    category: PrimaryCategory | str, table: Optional[SchemaTable] = None
) -> AttributeSchema:
    return (table or DEFAULT_SCHEMA_TABLE).schema_for(category)


@dataclass(frozen=True)
class RoutingSignals:
    """Either a manual label or a classifier distribution over the five classes."""

    manual_label: Optional[PrimaryCategory] = None
    distribution: Optional[Mapping[str, float]] = None


def route_category(signals: RoutingSignals) -> PrimaryCategory:
    """Manual label wins; otherwise argmax of the distribution with ties
    broken by enumeration order."""
    if signals.manual_label is not None:
        return PrimaryCategory(signals.manual_label)
    if not signals.distribution:
        raise NoSignal("neither manual label nor distribution supplied")
    dist = dict(signals.distribution)
    unknown = set(dist) - {c.value for c in PrimaryCategory}
    if unknown:
        raise NoSignal(f"distribution names unknown categories: {sorted(unknown)}")
    best: Optional[PrimaryCategory] = None
    best_score = float("-inf")
    for cat in CATEGORY_ORDER:
        score = float(dist.get(cat.value, float("-inf")))
        if score > best_score:
            best, best_score = cat, score
    if best is None or best_score == float("-inf"):
        raise NoSignal("empty distribution")
    return best


@dataclass(frozen=True)
class StructuredCaption:
    record_id: str
    category: PrimaryCategory
    attributes: dict[str, str]
    version: int = 1
    updated_at: float = 0.0
    natural_caption: Optional[str] = None
    natural_caption_version: Optional[int] = None
    raw_caption: Optional[str] = None

    def to_dict(self) -> dict:
        out = {
            "record_id": self.record_id,
            "category": self.category.value,
            "attributes": dict(self.attributes),
            "version": self.version,
            "updated_at": self.updated_at,
        }
        if self.natural_caption is not None:
            out["natural_caption"] = self.natural_caption
            out["natural_caption_version"] = self.natural_caption_version
        if self.raw_caption is not None:
            out["raw_caption"] = self.raw_caption
        return out

    @classmethod
    def from_dict(cls, obj: Mapping) -> "StructuredCaption":
        return cls(
            record_id=obj["record_id"],
            category=PrimaryCategory(obj["category"]),
            attributes=dict(obj["attributes"]),
            version=int(obj["version"]),
            updated_at=float(obj.get("updated_at", 0.0)),
            natural_caption=obj.get("natural_caption"),
            natural_caption_version=obj.get("natural_caption_version"),
            raw_caption=obj.get("raw_caption"),
        )


@dataclass(frozen=True)
class CaptionPatch:
    set: dict[str, str] = field(default_factory=dict)
    remove: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        overlap = set(self.set) & set(self.remove)
        if overlap:
            raise InvalidPatch(f"patch sets and removes the same keys: {sorted(overlap)}")


def validate_caption(
    caption: StructuredCaption, table: Optional[SchemaTable] = None
) -> list[str]:
    """Ordered list of violations; empty means valid."""
    schema = attribute_schema(caption.category, table)
    violations: list[str] = []
    dims = set(schema.dimensions)
    for key in caption.attributes:
        if key not in dims:
            violations.append(f"unknown attribute {key!r} for {caption.category.value}")
    for req in schema.required:
        text = caption.attributes.get(req)
        if text is None:
            violations.append(f"missing required attribute {req!r}")
        elif not text.strip():
            violations.append(f"required attribute {req!r} is empty")
    return violations


def merge_caption_update(
    current: StructuredCaption,
    patch: CaptionPatch,
    table: Optional[SchemaTable] = None,
    *,
    now: Optional[float] = None,
) -> StructuredCaption:
    """Apply set-then-remove, bump the version, keep untouched keys verbatim."""
    schema = attribute_schema(current.category, table)
    dims = set(schema.dimensions)
    bad = (set(patch.set) | set(patch.remove)) - dims
    if bad:
        raise InvalidPatch(f"patch touches attributes outside the schema: {sorted(bad)}")

    attributes = dict(current.attributes)
    attributes.update(patch.set)
    for key in patch.remove:
        attributes.pop(key, None)

    merged = replace(
        current,
        attributes=attributes,
        version=current.version + 1,
        updated_at=time.time() if now is None else now,
    )
    problems = validate_caption(merged, table)
    if problems:
        raise WouldInvalidate("; ".join(problems))
    return merged


@dataclass(frozen=True)
class RewriteRequest:
    record_id: str
    caption_version: int
    prompt: str


REWRITE_TEMPLATE = (
    "Rewrite the following attribute notes as one fluent paragraph that keeps "
    "every stated detail and adds nothing:\n{body}"
)


def build_rewrite_request(
    caption: StructuredCaption, table: Optional[SchemaTable] = None
) -> RewriteRequest:
    """Deterministic rewrite payload: dimensions listed in schema order."""
    problems = validate_caption(caption, table)
    if problems:
        raise InvalidCaption("; ".join(problems))
    schema = attribute_schema(caption.category, table)
    lines = [
        f"- {dim}: {caption.attributes[dim]}"
        for dim in schema.dimensions
        if dim in caption.attributes
    ]
    return RewriteRequest(
        record_id=caption.record_id,
        caption_version=caption.version,
        prompt=REWRITE_TEMPLATE.format(body="\n".join(lines)),
    )


class RewriteClient(Protocol):
    def rewrite(self, request: RewriteRequest) -> str: ...


class EchoRewriteClient:
    """Test double: flattens the prompt body into a single line."""

    def rewrite(self, request: RewriteRequest) -> str:
        body = request.prompt.split("\n", 1)[1] if "\n" in request.prompt else ""
        return " ".join(part.split(": ", 1)[-1] for part in body.splitlines())


def attach_rewrite(caption: StructuredCaption, client: RewriteClient) -> StructuredCaption:
    """Store the rewrite alongside the structured caption, never replacing it."""
    request = build_rewrite_request(caption)
    text = client.rewrite(request)
    return replace(
        caption,
        natural_caption=text,
        natural_caption_version=request.caption_version,
    )


class CaptionStore:
    """In-memory caption store with optimistic versioning and JSON persistence."""

    def __init__(self, table: Optional[SchemaTable] = None):
        self.table = table or DEFAULT_SCHEMA_TABLE
        self._captions: dict[str, StructuredCaption] = {}
        self._lock = threading.Lock()

    def get(self, record_id: str) -> Optional[StructuredCaption]:
        return self._captions.get(record_id)

    def put(self, caption: StructuredCaption) -> None:
        problems = validate_caption(caption, self.table)
        if problems:
            raise InvalidCaption("; ".join(problems))
        with self._lock:
            self._captions[caption.record_id] = caption

    def merge(
        self, record_id: str, patch: CaptionPatch, expected_version: int
    ) -> StructuredCaption:
        with self._lock:
            current = self._captions.get(record_id)
            if current is None:
                raise InvalidCaption(f"no caption stored for {record_id}")
            if current.version != expected_version:
                raise VersionConflict(
                    f"caption {record_id} is at version {current.version}, "
                    f"merge expected {expected_version}"
                )
            merged = merge_caption_update(current, patch, self.table)
            self._captions[record_id] = merged
            return merged

    def save(self, path: str | Path) -> None:
        body = {rid: cap.to_dict() for rid, cap in sorted(self._captions.items())}
        Path(path).write_text(json.dumps(body, indent=2, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, table: Optional[SchemaTable] = None) -> "CaptionStore":
        store = cls(table)
        body = json.loads(Path(path).read_text(encoding="utf-8"))
        for rid, obj in body.items():
            store._captions[rid] = StructuredCaption.from_dict(obj)
        return store
