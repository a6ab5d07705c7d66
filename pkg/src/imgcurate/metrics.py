"""Low-level image quality operators and the per-record scoring entry point.

Four concrete operators are implemented:

* compression ratio — actual encoded size over the theoretical uncompressed
  size, so that a lower value means heavier compression. The orientation is
  deliberate: the score is the fraction of the raw size that survived
  encoding, and filters cut everything *below* a stage minimum.
* edge pixel variance — population variance of border-band luma; near zero
  flags solid borders and homogeneous backgrounds.
* bpp complexity — bits per pixel after a fixed JPEG re-encode (baseline,
  quality 75, 4:2:0); a proxy for structural complexity.
* plugin scores — authenticity (probability the image is real), watermark
  and greasy-texture probabilities from pluggable scorers.

All operators are pure functions of their inputs. 16-bit samples are
right-shifted to 8 bits before the luma and JPEG paths so golden values stay
stable across bit depths.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from PIL import Image

from .errors import (
    BandTooWide,
    DecodeFailure,
    EmptyImage,
    EncodeFailure,
    InvalidMeta,
    ProviderUnavailable,
)
from .imgio import ImageMeta, PixelBuffer, decode_pixels
from .records import ImageRecord
from .scorers import ScorerProviderSet
from .thresholds import ThresholdProfile

# Rec. 601 luma weights; alpha is always excluded.
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)

JPEG_PROXY_QUALITY = 75

OPERATOR_NAMES = (
    "compression_ratio",
    "edge_variance",
    "bpp",
    "ai_score",
    "watermark_score",
    "greasy_score",
)


@dataclass
class QualityReport:
    record_id: str
    compression_ratio: float
    edge_variance: float
    bpp: float
    ai_score: Optional[float] = None
    watermark_score: Optional[float] = None
    greasy_score: Optional[float] = None
    decision: str = "PASS"
    violations: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "QualityReport":
        obj = json.loads(line)
        return cls(**{k: obj[k] for k in (
            "record_id", "compression_ratio", "edge_variance", "bpp",
            "ai_score", "watermark_score", "greasy_score", "decision", "violations",
        )})


def compression_ratio(meta: ImageMeta) -> float:
    """encoded_size / (width * height * channels * bit_depth / 8).

    Lower means more aggressively compressed.
    """
    if meta.width < 1 or meta.height < 1 or meta.channels < 1 or meta.bit_depth < 1:
        raise InvalidMeta(f"degenerate metadata: {meta}")
    theoretical = meta.theoretical_size
    if theoretical <= 0:
        raise InvalidMeta("theoretical size is zero")
    return meta.encoded_size / theoretical


def to_luma(pixels: PixelBuffer) -> np.ndarray:
    """(height, width) float64 luma plane; 16-bit samples are shifted to 8-bit."""
    samples = pixels.samples
    if pixels.meta.bit_depth == 16:
        samples = (samples >> 8).astype(np.uint8)
    c = pixels.meta.channels
    if c == 1:
        return samples[:, :, 0].astype(np.float64)
    return samples[:, :, :3].astype(np.float64) @ _LUMA_WEIGHTS


def border_band_mask(height: int, width: int, band_width: int) -> np.ndarray:
    """Boolean mask of pixels within ``band_width`` of any border."""
    mask = np.zeros((height, width), dtype=bool)
    b = band_width
    mask[:b, :] = True
    mask[-b:, :] = True
    mask[:, :b] = True
    mask[:, -b:] = True
    return mask


def edge_pixel_variance(pixels: PixelBuffer, band_width: int) -> float:
    """Population variance of luma over the border band."""
    h, w = pixels.meta.height, pixels.meta.width
    if h < 1 or w < 1 or pixels.samples.size == 0:
        raise EmptyImage("no pixels")
    if band_width < 1 or band_width > min(h, w) // 2:
        raise BandTooWide(
            f"band width {band_width} outside [1, {min(h, w) // 2}] for {w}x{h}"
        )
    return _band_variance(pixels, band_width)


def _band_variance(pixels: PixelBuffer, band_width: int) -> float:
    luma = to_luma(pixels)
    band = luma[border_band_mask(luma.shape[0], luma.shape[1], band_width)]
    # exact zero for a constant band; summation rounding must not leak in
    if band.min() == band.max():
        return 0.0
    mean = band.sum() / band.size
    return float(((band - mean) ** 2).sum() / band.size)


def default_band_width(meta: ImageMeta) -> int:
    """Border band used by ``score_image``: ~2% of the short side, min 2,
    clamped so it stays a valid band for the image."""
    band = max(2, round(0.02 * min(meta.width, meta.height)))
    return max(1, min(band, max(1, min(meta.width, meta.height) // 2)))


def _to_pil(pixels: PixelBuffer) -> Image.Image:
    samples = pixels.samples
    if pixels.meta.bit_depth == 16:
        samples = (samples >> 8).astype(np.uint8)
    c = pixels.meta.channels
    if c == 1:
        return Image.fromarray(samples[:, :, 0], mode="L")
    if c == 4:
        # JPEG carries no alpha; drop it.
        return Image.fromarray(samples[:, :, :3], mode="RGB")
    return Image.fromarray(samples, mode="RGB")


def encode_jpeg(pixels: PixelBuffer, quality: int) -> bytes:
    """Baseline JPEG at the given quality with 4:2:0 subsampling."""
    if not 1 <= quality <= 100:
        raise EncodeFailure(f"JPEG quality {quality} outside [1, 100]")
    try:
        im = _to_pil(pixels)
        buf = io.BytesIO()
        im.save(buf, format="JPEG", quality=quality, subsampling=2, progressive=False)
    except (OSError, ValueError) as exc:
        raise EncodeFailure(f"JPEG encode failed: {exc}") from exc
    return buf.getvalue()


def bpp_complexity(pixels: PixelBuffer, jpeg_quality: int = JPEG_PROXY_QUALITY) -> float:
    """8 * encoded_bytes / pixel_count after the fixed JPEG re-encode."""
    encoded = encode_jpeg(pixels, jpeg_quality)
    return 8.0 * len(encoded) / pixels.meta.pixel_count


def score_image(
    record: ImageRecord,
    providers: ScorerProviderSet,
    profile: ThresholdProfile,
    *,
    band_width: Optional[int] = None,
    jpeg_quality: int = JPEG_PROXY_QUALITY,
    allow_webp: bool = False,
) -> QualityReport:
    """Run every operator on one record and apply the profile thresholds.

    Plugin scorers that raise ProviderUnavailable leave their score absent;
    the decision is computed over the operators that did produce a value.
    """
    try:
        pixels = decode_pixels(record.blob, allow_webp=allow_webp)
    except Exception as exc:
        raise DecodeFailure(f"record {record.record_id}: {exc}") from exc

    ratio = compression_ratio(pixels.meta)
    band = band_width if band_width is not None else default_band_width(pixels.meta)
    variance = _band_variance(pixels, band)
    bpp = bpp_complexity(pixels, jpeg_quality)

    def run(scorer) -> Optional[float]:
        if scorer is None:
            return None
        try:
            return float(scorer.score(record.record_id, record.blob))
        except ProviderUnavailable:
            return None

    ai = run(providers.authenticity)
    watermark = run(providers.watermark)
    greasy = run(providers.greasy)

    violations = profile.violations(
        compression_ratio=ratio,
        edge_variance=variance,
        bpp=bpp,
        ai_score=ai,
        watermark_score=watermark,
        greasy_score=greasy,
    )
    return QualityReport(
        record_id=record.record_id,
        compression_ratio=ratio,
        edge_variance=variance,
        bpp=bpp,
        ai_score=ai,
        watermark_score=watermark,
        greasy_score=greasy,
        decision="FAIL" if violations else "PASS",
        violations=violations,
    )


def write_reports(reports: Iterable[QualityReport], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rep in reports:
            fh.write(rep.to_json() + "\n")


def read_reports(path: str | Path) -> list[QualityReport]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(QualityReport.from_json(line))
    return out
