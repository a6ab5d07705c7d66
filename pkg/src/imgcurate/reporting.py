"""Figure rendering for filter-pass reports.

One histogram PNG per operator, with the active threshold drawn in, plus a
violation bar chart. Figures land next to the delimited report output so a
pass leaves a self-contained audit trail.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .pipeline import PassReport
from .thresholds import ThresholdProfile

_THRESHOLD_FIELDS = {
    "compression_ratio": ("min_compression_ratio", "min"),
    "edge_variance": ("min_edge_variance", "min"),
    "bpp": ("min_bpp", "min"),
    "ai_score": ("min_ai_score", "min"),
    "watermark_score": ("max_watermark_score", "max"),
    "greasy_score": ("max_greasy_score", "max"),
}


def render_report_figures(
    report: PassReport,
    out_dir: str | Path,
    profile: Optional[ThresholdProfile] = None,
) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    for op, stats in report.operator_scores.items():
        if not stats.scores:
            continue
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.hist(stats.scores, bins=30, color="#4878cf", edgecolor="white", linewidth=0.4)
        ax.set_xlabel(op.replace("_", " "))
        ax.set_ylabel("records")
        ax.set_title(f"{op} ({report.stage})")
        if profile is not None and op in _THRESHOLD_FIELDS:
            field_name, kind = _THRESHOLD_FIELDS[op]
            cutoff = getattr(profile, field_name)
            ax.axvline(cutoff, color="#d65f5f", linestyle="--", linewidth=1.2)
            ax.annotate(
                f"{kind} {cutoff:g}",
                xy=(cutoff, ax.get_ylim()[1]),
                xytext=(4, -12),
                textcoords="offset points",
                color="#d65f5f",
                fontsize=8,
            )
        fig.tight_layout()
        path = out / f"hist_{op}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    if report.violation_counts:
        names = sorted(report.violation_counts)
        values = [report.violation_counts[n] for n in names]
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.barh(names, values, color="#d65f5f")
        ax.set_xlabel("violations")
        ax.set_title(f"operator violations ({report.stage})")
        fig.tight_layout()
        path = out / "violations.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
