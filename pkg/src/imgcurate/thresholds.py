"""Stage-wise threshold profiles for the quality filters.

PT keeps permissive baseline cutoffs aimed at scale; CT and SFT tighten
every field. Profiles are validated at load: a later stage must be at
least as strict as the one before it, field by field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Mapping, Optional

from .errors import NonMonotoneProfiles

STAGES = ("PT", "CT", "SFT")

# Fields where a larger value is stricter.
_MIN_FIELDS = ("min_compression_ratio", "min_edge_variance", "min_bpp", "min_ai_score")
# Fields where a smaller value is stricter.
_MAX_FIELDS = ("max_watermark_score", "max_greasy_score")


@dataclass(frozen=True)
class ThresholdProfile:
    stage: str
    min_compression_ratio: float
    min_edge_variance: float
    min_bpp: float
    min_ai_score: float
    max_watermark_score: float
    max_greasy_score: float

    def violations(
        self,
        *,
        compression_ratio: float,
        edge_variance: float,
        bpp: float,
        ai_score: Optional[float] = None,
        watermark_score: Optional[float] = None,
        greasy_score: Optional[float] = None,
    ) -> list[str]:
        """Operator names whose scores violate this profile.

        Absent plugin scores are skipped: the decision is computed on the
        operators that did run.
        """
        out: list[str] = []
        if compression_ratio < self.min_compression_ratio:
            out.append("compression_ratio")
        if edge_variance < self.min_edge_variance:
            out.append("edge_variance")
        if bpp < self.min_bpp:
            out.append("bpp")
        if ai_score is not None and ai_score < self.min_ai_score:
            out.append("ai_score")
        if watermark_score is not None and watermark_score > self.max_watermark_score:
            out.append("watermark_score")
        if greasy_score is not None and greasy_score > self.max_greasy_score:
            out.append("greasy_score")
        return out

    def at_least_as_strict_as(self, other: "ThresholdProfile") -> bool:
        for f in _MIN_FIELDS:
            if getattr(self, f) < getattr(other, f):
                return False
        for f in _MAX_FIELDS:
            if getattr(self, f) > getattr(other, f):
                return False
        return True

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, stage: str, obj: Mapping) -> "ThresholdProfile":
        return cls(
            stage=stage,
            min_compression_ratio=float(obj["min_compression_ratio"]),
            min_edge_variance=float(obj["min_edge_variance"]),
            min_bpp=float(obj["min_bpp"]),
            min_ai_score=float(obj["min_ai_score"]),
            max_watermark_score=float(obj["max_watermark_score"]),
            max_greasy_score=float(obj["max_greasy_score"]),
        )


# Baseline cutoffs calibrated on the synthetic fixture corpus; real corpora
# tune these through configuration, they are not constants of the method.
DEFAULT_PROFILES: dict[str, ThresholdProfile] = {
    "PT": ThresholdProfile(
        stage="PT",
        min_compression_ratio=0.02,
        min_edge_variance=10.0,
        min_bpp=0.2,
        min_ai_score=0.05,
        max_watermark_score=0.98,
        max_greasy_score=0.98,
    ),
    "CT": ThresholdProfile(
        stage="CT",
        min_compression_ratio=0.05,
        min_edge_variance=50.0,
        min_bpp=0.5,
        min_ai_score=0.2,
        max_watermark_score=0.9,
        max_greasy_score=0.9,
    ),
    "SFT": ThresholdProfile(
        stage="SFT",
        min_compression_ratio=0.08,
        min_edge_variance=100.0,
        min_bpp=1.0,
        min_ai_score=0.4,
        max_watermark_score=0.8,
        max_greasy_score=0.8,
    ),
}


def validate_profiles(profiles: Mapping[str, ThresholdProfile]) -> None:
    """Enforce the PT <= CT <= SFT strictness ordering, field-wise."""
    missing = [s for s in STAGES if s not in profiles]
    if missing:
        raise NonMonotoneProfiles(f"missing stage profiles: {missing}")
    for earlier, later in zip(STAGES, STAGES[1:]):
        if not profiles[later].at_least_as_strict_as(profiles[earlier]):
            raise NonMonotoneProfiles(
                f"{later} profile is looser than {earlier} on at least one field"
            )


def build_threshold_profile(
    stage: str, profiles: Optional[Mapping[str, ThresholdProfile]] = None
) -> ThresholdProfile:
    """Look up the stage's profile after validating the whole table."""
    table = dict(profiles) if profiles is not None else dict(DEFAULT_PROFILES)
    validate_profiles(table)
    if stage not in table:
        raise NonMonotoneProfiles(f"unknown stage {stage!r}; expected one of {STAGES}")
    return table[stage]


def load_profiles(path: str | Path) -> dict[str, ThresholdProfile]:
    """Load a three-stage profile table from a JSON file and validate it."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    table = {stage: ThresholdProfile.from_dict(stage, body) for stage, body in obj.items()}
    validate_profiles(table)
    return table


def load_single_profile(path: str | Path, stage: str = "") -> ThresholdProfile:
    """Load one profile from JSON; accepts either a bare profile object or a
    stage-keyed table (then ``stage`` selects the entry)."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if "min_compression_ratio" in obj:
        return ThresholdProfile.from_dict(stage or str(obj.get("stage", "PT")), obj)
    table = {s: ThresholdProfile.from_dict(s, body) for s, body in obj.items()}
    validate_profiles(table)
    key = stage or STAGES[0]
    if key not in table:
        raise NonMonotoneProfiles(f"profile file has no stage {key!r}")
    return table[key]


def dump_profiles(profiles: Mapping[str, ThresholdProfile], path: str | Path) -> None:
    body = {
        stage: {k: v for k, v in p.to_dict().items() if k != "stage"}
        for stage, p in profiles.items()
    }
    Path(path).write_text(json.dumps(body, indent=2, sort_keys=True), encoding="utf-8")
