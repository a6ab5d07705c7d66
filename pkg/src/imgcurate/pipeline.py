"""Filter-pass orchestration: score every record, drop failures, report.

The orchestrated stage order is dedup -> score -> threshold -> sample; the
filter pass covers the middle two and never reorders surviving records.
Reports carry per-operator score distributions and violation counts plus a
seeded random sample of passed records for manual spot checks.
"""

from __future__ import annotations

import dataclasses
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .dedup import DuplicateGroup, KEEP_REPRESENTATIVE, dedup_manifest, find_near_duplicates
from .embeddings import EmbeddingGateway, EmbeddingVector
from .errors import DecodeFailure
from .metrics import OPERATOR_NAMES, QualityReport, score_image
from .records import ImageRecord, Manifest
from .sampling import SamplingPlan, ShortfallReport, sample_manifest
from .scorers import ScorerProviderSet
from .thresholds import ThresholdProfile

HISTOGRAM_BINS = 20
INSPECTION_SAMPLE_SIZE = 20

BlobLoader = Callable[[str], bytes]


@dataclass
class OperatorStats:
    scores: list[float] = field(default_factory=list)

    def histogram(self, bins: int = HISTOGRAM_BINS) -> dict:
        if not self.scores:
            return {"bin_edges": [], "counts": []}
        counts, edges = np.histogram(np.asarray(self.scores, dtype=np.float64), bins=bins)
        return {"bin_edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


@dataclass
class PassReport:
    stage: str
    total: int = 0
    passed: int = 0
    failed: int = 0
    decode_failures: list[str] = field(default_factory=list)
    violation_counts: dict[str, int] = field(default_factory=dict)
    operator_scores: dict[str, OperatorStats] = field(default_factory=dict)
    inspection_sample: list[str] = field(default_factory=list)
    reports: list[QualityReport] = field(default_factory=list)

    def histograms(self, bins: int = HISTOGRAM_BINS) -> dict[str, dict]:
        return {op: stats.histogram(bins) for op, stats in self.operator_scores.items()}

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "total": self.total,
            "passed": self.passed,
            "failed": self.failed,
            "decode_failures": list(self.decode_failures),
            "violation_counts": dict(self.violation_counts),
            "operator_histograms": self.histograms(),
            "operator_scores": {op: s.scores for op, s in self.operator_scores.items()},
            "inspection_sample": list(self.inspection_sample),
        }

    def write(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )

    @classmethod
    def from_dict(cls, obj: dict) -> "PassReport":
        report = cls(
            stage=obj["stage"],
            total=int(obj["total"]),
            passed=int(obj["passed"]),
            failed=int(obj["failed"]),
            decode_failures=list(obj.get("decode_failures", [])),
            violation_counts=dict(obj.get("violation_counts", {})),
            inspection_sample=list(obj.get("inspection_sample", [])),
        )
        for op, scores in obj.get("operator_scores", {}).items():
            report.operator_scores[op] = OperatorStats(scores=list(scores))
        return report

    @classmethod
    def read(cls, path: str | Path) -> "PassReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def run_filter_pass(
    source: Manifest,
    profile: ThresholdProfile,
    providers: ScorerProviderSet,
    blob_loader: BlobLoader,
    *,
    inspection_seed: int = 0,
    inspection_size: int = INSPECTION_SAMPLE_SIZE,
    allow_webp: bool = False,
) -> tuple[Manifest, PassReport]:
    """Score every record against the profile; survivors keep source order."""
    report = PassReport(stage=profile.stage, total=len(source))
    for op in OPERATOR_NAMES:
        report.operator_scores[op] = OperatorStats()

    survivors = []
    for entry in source:
        try:
            blob = blob_loader(entry.uri)
            record = ImageRecord(record_id=entry.record_id, blob=blob, source=entry.uri)
            qr = score_image(record, providers, profile, allow_webp=allow_webp)
        except (DecodeFailure, OSError) as exc:
            report.decode_failures.append(entry.record_id)
            report.failed += 1
            continue
        report.reports.append(qr)
        report.operator_scores["compression_ratio"].scores.append(qr.compression_ratio)
        report.operator_scores["edge_variance"].scores.append(qr.edge_variance)
        report.operator_scores["bpp"].scores.append(qr.bpp)
        if qr.ai_score is not None:
            report.operator_scores["ai_score"].scores.append(qr.ai_score)
        if qr.watermark_score is not None:
            report.operator_scores["watermark_score"].scores.append(qr.watermark_score)
        if qr.greasy_score is not None:
            report.operator_scores["greasy_score"].scores.append(qr.greasy_score)

        if qr.decision == "PASS":
            survivors.append(dataclasses.replace(entry, decision="PASS"))
            report.passed += 1
        else:
            report.failed += 1
            for op in qr.violations:
                report.violation_counts[op] = report.violation_counts.get(op, 0) + 1

    rng = random.Random(inspection_seed)
    passed_ids = [e.record_id for e in survivors]
    size = min(inspection_size, len(passed_ids))
    report.inspection_sample = sorted(rng.sample(passed_ids, size)) if size else []

    metadata = {
        "stage": profile.stage,
        "profile": profile.to_dict(),
        "source_count": len(source),
    }
    return Manifest.from_entries(survivors, metadata=metadata), report


@dataclass
class StageResult:
    manifest: Manifest
    duplicate_groups: list[DuplicateGroup]
    pass_report: PassReport
    sample_report: Optional[ShortfallReport] = None


def curate_stage(
    source: Manifest,
    profile: ThresholdProfile,
    providers: ScorerProviderSet,
    gateway: EmbeddingGateway,
    blob_loader: BlobLoader,
    *,
    plan: Optional[SamplingPlan] = None,
    sample_n: Optional[int] = None,
    dedup_threshold: float = 0.92,
) -> StageResult:
    """Run one stage end to end: dedup -> score -> threshold -> sample."""
    vectors: dict[str, EmbeddingVector] = {}
    for entry in source:
        try:
            vectors[entry.record_id] = gateway.embed_image(blob_loader(entry.uri))
        except (DecodeFailure, OSError):
            continue
    groups = find_near_duplicates(vectors, dedup_threshold)
    deduped = dedup_manifest(source, groups, KEEP_REPRESENTATIVE)

    filtered, pass_report = run_filter_pass(deduped, profile, providers, blob_loader)

    sample_report = None
    manifest = filtered
    if plan is not None and sample_n is not None and len(filtered) > 0:
        manifest, sample_report = sample_manifest(plan, filtered, sample_n)
    return StageResult(
        manifest=manifest,
        duplicate_groups=groups,
        pass_report=pass_report,
        sample_report=sample_report,
    )
