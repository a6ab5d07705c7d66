"""Stage-wise sampling plans and deterministic manifest sampling.

Task mixtures default to the stage recipes (PT draws text-to-image and
image-to-image 7:3; CT and SFT add the two series tasks at 7:2:0.5:0.5),
optionally reshaped by upweight multipliers. Category targets flatten the
long tail toward the mean, capped by availability. All draws are seeded
and reproducible byte for byte.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .errors import EmptyCorpus, InsufficientData
from .records import Manifest, ManifestEntry

TASK_ORDER = ("T2I", "I2I", "T2S", "TI2S")

STAGE_TASK_RATIOS: dict[str, dict[str, float]] = {
    "PT": {"T2I": 7.0, "I2I": 3.0, "T2S": 0.0, "TI2S": 0.0},
    "CT": {"T2I": 7.0, "I2I": 2.0, "T2S": 0.5, "TI2S": 0.5},
    "SFT": {"T2I": 7.0, "I2I": 2.0, "T2S": 0.5, "TI2S": 0.5},
}

# Tasks that typically need longer training get a moderate default boost
# when upweighting is requested without explicit multipliers.
DEFAULT_UPWEIGHTS = {"text_rendering": 1.5, "identity_preservation": 1.5}

DEFAULT_FLATTEN_STRENGTH = 0.5

RATIO_SUM_TOL = 1e-9


@dataclass
class SamplingPlan:
    stage: str
    task_ratios: dict[str, float]
    category_targets: dict[str, int]
    upweighted_tasks: dict[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        total = sum(self.task_ratios.values())
        if abs(total - 1.0) > RATIO_SUM_TOL:
            raise ValueError(f"task ratios sum to {total}, expected 1")
        if self.stage == "PT":
            for task in ("T2S", "TI2S"):
                if self.task_ratios.get(task, 0.0) != 0.0:
                    raise ValueError("PT plans carry no series-task weight")

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "task_ratios": dict(self.task_ratios),
            "category_targets": dict(self.category_targets),
            "upweighted_tasks": dict(self.upweighted_tasks),
            "seed": self.seed,
        }

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path) -> "SamplingPlan":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            stage=obj["stage"],
            task_ratios={k: float(v) for k, v in obj["task_ratios"].items()},
            category_targets={k: int(v) for k, v in obj["category_targets"].items()},
            upweighted_tasks={k: float(v) for k, v in obj.get("upweighted_tasks", {}).items()},
            seed=int(obj.get("seed", 0)),
        )


def normalized_task_ratios(
    stage: str, upweights: Optional[Mapping[str, float]] = None
) -> dict[str, float]:
    """Stage defaults with multipliers applied, renormalized to sum 1."""
    if stage not in STAGE_TASK_RATIOS:
        raise ValueError(f"unknown stage {stage!r}")
    weights = dict(STAGE_TASK_RATIOS[stage])
    for task, mult in (upweights or {}).items():
        if task in weights:
            weights[task] *= float(mult)
    total = sum(weights.values())
    if total <= 0:
        raise ValueError("all task weights are zero")
    return {task: weights[task] / total for task in TASK_ORDER}


def flatten_category_targets(
    available: Mapping[str, int], flatten_strength: float = DEFAULT_FLATTEN_STRENGTH
) -> dict[str, int]:
    """Pull each category's target toward the mean, capped by availability.

    strength 0 keeps availability as-is; strength 1 levels every target at
    the mean count (or the category's full stock when that is smaller).
    """
    if not 0.0 <= flatten_strength <= 1.0:
        raise ValueError(f"flatten_strength {flatten_strength} outside [0, 1]")
    counts = {c: int(n) for c, n in available.items() if int(n) > 0}
    if not counts:
        return {}
    mean = sum(counts.values()) / len(counts)
    out = {}
    for cat, n in counts.items():
        target = round(n + flatten_strength * (mean - n))
        out[cat] = max(0, min(n, target))
    return out


def build_sampling_plan(
    stage: str,
    available: Mapping[str, int],
    *,
    upweights: Optional[Mapping[str, float]] = None,
    flatten_strength: float = DEFAULT_FLATTEN_STRENGTH,
    seed: int = 0,
) -> SamplingPlan:
    if any(int(n) < 0 for n in available.values()):
        raise ValueError("availability counts must be non-negative")
    if sum(int(n) for n in available.values()) == 0:
        raise EmptyCorpus("no records available in any category")
    return SamplingPlan(
        stage=stage,
        task_ratios=normalized_task_ratios(stage, upweights),
        category_targets=flatten_category_targets(available, flatten_strength),
        upweighted_tasks=dict(upweights or {}),
        seed=seed,
    )


def largest_remainder_counts(
    total: int, weights: Mapping[str, float], order: Sequence[str]
) -> dict[str, int]:
    """Integer apportionment of ``total`` by weight; counts sum exactly."""
    quotas = {key: total * weights.get(key, 0.0) for key in order}
    counts = {key: math.floor(q) for key, q in quotas.items()}
    shortfall = total - sum(counts.values())
    by_remainder = sorted(
        order, key=lambda key: (-(quotas[key] - counts[key]), order.index(key))
    )
    for key in by_remainder[:shortfall]:
        counts[key] += 1
    return counts


@dataclass
class ShortfallReport:
    requested: int
    drawn: int
    per_task: dict[str, dict[str, int]] = field(default_factory=dict)

    @property
    def missing(self) -> int:
        return self.requested - self.drawn


def sample_manifest(
    plan: SamplingPlan,
    source: Manifest,
    n: int,
    *,
    strict: bool = False,
) -> tuple[Manifest, ShortfallReport]:
    """Draw ``n`` records without replacement following the plan.

    Per-task counts come from largest-remainder apportionment of the task
    ratios. Within a task, category quotas follow the plan's targets
    proportionally, capped by availability, with any shortfall redistributed
    to categories that still have stock. Lenient mode reports shortfalls;
    strict mode raises on them. Output preserves the source manifest order.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if len(source) == 0:
        raise EmptyCorpus("source manifest is empty")

    rng = random.Random(plan.seed)
    task_counts = largest_remainder_counts(n, plan.task_ratios, TASK_ORDER)

    by_task: dict[str, dict[str, list[ManifestEntry]]] = {t: {} for t in TASK_ORDER}
    for entry in source:
        if entry.task in by_task:
            by_task[entry.task].setdefault(entry.category, []).append(entry)

    chosen_ids: set[str] = set()
    report = ShortfallReport(requested=n, drawn=0)

    for task in TASK_ORDER:
        want = task_counts[task]
        if want == 0:
            continue
        pools = by_task[task]
        quotas = _category_quotas(want, pools, plan.category_targets)
        took = 0
        for cat in sorted(pools):
            pool = pools[cat]
            quota = quotas.get(cat, 0)
            if quota <= 0:
                continue
            picks = rng.sample(range(len(pool)), min(quota, len(pool)))
            for i in picks:
                chosen_ids.add(pool[i].record_id)
            took += len(picks)
        report.per_task[task] = {"requested": want, "drawn": took}
        report.drawn += took
        if took < want and strict:
            raise InsufficientData(
                f"task {task}: requested {want}, only {took} available"
            )

    entries = [e for e in source if e.record_id in chosen_ids]
    metadata = {
        "plan": plan.to_dict(),
        "sample_n": n,
        "source_count": len(source),
    }
    return Manifest.from_entries(entries, metadata=metadata), report


def _category_quotas(
    want: int,
    pools: Mapping[str, Sequence[ManifestEntry]],
    targets: Mapping[str, int],
) -> dict[str, int]:
    """Split a task's draw count across categories.

    Plan targets act as weights, restricted to categories present in this
    task; quotas above availability are clipped and the remainder flows to
    categories with stock left, proportionally, until either the count or
    the stock runs out.
    """
    cats = sorted(pools)
    if not cats:
        return {}
    weights = {c: float(targets.get(c, 0)) for c in cats}
    if sum(weights.values()) <= 0:
        weights = {c: float(len(pools[c])) for c in cats}
    total_w = sum(weights.values())
    normalized = {c: w / total_w for c, w in weights.items()}
    quotas = largest_remainder_counts(want, normalized, cats)

    capped = {c: min(quotas[c], len(pools[c])) for c in cats}
    remaining = want - sum(capped.values())
    while remaining > 0:
        open_cats = [c for c in cats if capped[c] < len(pools[c])]
        if not open_cats:
            break
        headroom = {c: len(pools[c]) - capped[c] for c in open_cats}
        share_w = {c: headroom[c] for c in open_cats}
        total = sum(share_w.values())
        add = largest_remainder_counts(
            min(remaining, total), {c: share_w[c] / total for c in open_cats}, open_cats
        )
        for c in open_cats:
            give = min(add[c], headroom[c])
            capped[c] += give
            remaining -= give
        if all(add[c] == 0 for c in open_cats):
            break
    return capped
