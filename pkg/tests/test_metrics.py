"""Quality operators: ratio and variance exactness, bpp ordering, scoring."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imgcurate.errors import BandTooWide, EncodeFailure, InvalidMeta, ProviderUnavailable
from imgcurate.imgio import ImageFormat, ImageMeta, decode_pixels
from imgcurate.metrics import (
    bpp_complexity,
    compression_ratio,
    edge_pixel_variance,
    encode_jpeg,
    score_image,
)
from imgcurate.records import ImageRecord
from imgcurate.scorers import ScorerProviderSet
from imgcurate.thresholds import DEFAULT_PROFILES, ThresholdProfile

from conftest import (
    buffer_from_array,
    constant_image,
    encode_png,
    noise_image,
    photo_like_image,
)


def meta(w, h, c=3, bd=8, size=1000):
    return ImageMeta(width=w, height=h, channels=c, bit_depth=bd,
                     encoded_size=size, format=ImageFormat.PNG)


class TestCompressionRatio:
    def test_encoded_equals_theoretical(self):
        assert compression_ratio(meta(100, 100, size=30000)) == 1.0

    def test_tenth(self):
        assert compression_ratio(meta(100, 100, size=3000)) == pytest.approx(0.1)

    def test_zero_dimension_rejected(self):
        with pytest.raises((InvalidMeta, Exception)):
            compression_ratio(meta(0, 100))

    @given(st.integers(min_value=1, max_value=10**7))
    def test_scale_covariant(self, size):
        base = compression_ratio(meta(64, 48, size=size))
        doubled = compression_ratio(meta(64, 48, size=2 * size))
        assert doubled == 2 * base


def brute_force_border_variance(arr: np.ndarray, band: int) -> float:
    """Independent oracle: explicit loop over border coordinates."""
    h, w = arr.shape[0], arr.shape[1]
    values = []
    for r in range(h):
        for c in range(w):
            if r < band or r >= h - band or c < band or c >= w - band:
                px = arr[r, c]
                if arr.ndim == 3 and arr.shape[2] >= 3:
                    luma = 0.299 * float(px[0]) + 0.587 * float(px[1]) + 0.114 * float(px[2])
                elif arr.ndim == 3:
                    luma = float(px[0])
                else:
                    luma = float(px)
                values.append(luma)
    mean = sum(values) / len(values)
    return sum((v - mean) ** 2 for v in values) / len(values)


class TestEdgePixelVariance:
    def test_constant_is_zero(self):
        buf = buffer_from_array(constant_image(20, 20))
        for band in (1, 2, 5, 10):
            assert edge_pixel_variance(buf, band) == 0.0

    def test_two_point_border(self):
        # border ring of a 4x4 image at band 1 has 12 pixels; make half 0, half 255
        arr = np.zeros((4, 4), dtype=np.uint8)
        ring = [(0, 0), (0, 1), (0, 2), (0, 3), (1, 3), (2, 3),
                (3, 3), (3, 2), (3, 1), (3, 0), (2, 0), (1, 0)]
        for i, (r, c) in enumerate(ring):
            arr[r, c] = 255 if i < 6 else 0
        buf = buffer_from_array(arr)
        assert edge_pixel_variance(buf, 1) == pytest.approx(16256.25)

    def test_matches_brute_force(self):
        arr = noise_image(64, 64, seed=11)
        buf = buffer_from_array(arr)
        got = edge_pixel_variance(buf, 2)
        want = brute_force_border_variance(arr, 2)
        assert got == pytest.approx(want, rel=1e-12)

    def test_band_too_wide(self):
        buf = buffer_from_array(noise_image(10, 10, seed=1))
        with pytest.raises(BandTooWide):
            edge_pixel_variance(buf, 6)
        with pytest.raises(BandTooWide):
            edge_pixel_variance(buf, 0)

    @pytest.mark.parametrize("transform", [
        lambda a: np.rot90(a, 1).copy(),
        lambda a: np.rot90(a, 2).copy(),
        lambda a: a[:, ::-1].copy(),
        lambda a: a[::-1, :].copy(),
    ])
    def test_symmetry_invariance(self, transform):
        arr = noise_image(32, 32, seed=7)
        base = edge_pixel_variance(buffer_from_array(arr), 3)
        moved = edge_pixel_variance(buffer_from_array(transform(arr)), 3)
        assert moved == pytest.approx(base, rel=1e-12)

    def test_16bit_shifted_to_8bit(self):
        lo = np.zeros((6, 6), dtype=np.uint8)
        hi = (lo.astype(np.uint16) << 8)
        arr8 = noise_image(6, 6, seed=3, channels=1)[:, :, 0]
        arr16 = (arr8.astype(np.uint16) << 8)
        v8 = edge_pixel_variance(buffer_from_array(arr8), 1)
        v16 = edge_pixel_variance(buffer_from_array(arr16), 1)
        assert v16 == pytest.approx(v8)


class TestBppComplexity:
    def test_constant_below_noise(self):
        const = buffer_from_array(constant_image(64, 64))
        noisy = buffer_from_array(noise_image(64, 64, seed=21))
        assert bpp_complexity(const, 75) < bpp_complexity(noisy, 75)

    def test_one_by_one_finite(self):
        buf = buffer_from_array(constant_image(1, 1))
        value = bpp_complexity(buf, 75)
        assert value > 0 and np.isfinite(value)

    def test_quality_zero_rejected(self):
        buf = buffer_from_array(constant_image(8, 8))
        with pytest.raises(EncodeFailure):
            bpp_complexity(buf, 0)

    def test_encode_is_stable(self):
        buf = buffer_from_array(noise_image(32, 32, seed=5))
        assert encode_jpeg(buf, 75) == encode_jpeg(buf, 75)


class _DownScorer:
    def score(self, record_id, blob):
        raise ProviderUnavailable("endpoint down")


class TestScoreImage:
    def test_constant_fails_edge_variance(self):
        blob = encode_png(constant_image(32, 32))
        record = ImageRecord("const", blob)
        report = score_image(record, ScorerProviderSet.stub(), DEFAULT_PROFILES["PT"])
        assert report.decision == "FAIL"
        assert "edge_variance" in report.violations

    def test_photo_passes_pt(self):
        blob = encode_png(photo_like_image(96, 96, seed=8))
        record = ImageRecord("photo", blob)
        report = score_image(record, ScorerProviderSet.stub(), DEFAULT_PROFILES["PT"])
        assert report.decision == "PASS"
        assert report.violations == []

    def test_provider_down_leaves_score_absent(self):
        blob = encode_png(photo_like_image(48, 48, seed=9))
        providers = ScorerProviderSet(authenticity=_DownScorer())
        report = score_image(ImageRecord("x", blob), providers, DEFAULT_PROFILES["PT"])
        assert report.ai_score is None
        assert report.watermark_score is None
        assert report.decision in ("PASS", "FAIL")

    def test_deterministic(self):
        blob = encode_png(photo_like_image(40, 40, seed=10))
        record = ImageRecord("d", blob)
        a = score_image(record, ScorerProviderSet.stub(), DEFAULT_PROFILES["CT"])
        b = score_image(record, ScorerProviderSet.stub(), DEFAULT_PROFILES["CT"])
        assert a.to_json() == b.to_json()

    def test_report_json_fields(self):
        blob = encode_png(photo_like_image(40, 40, seed=12))
        report = score_image(ImageRecord("r1", blob), ScorerProviderSet.stub(), DEFAULT_PROFILES["PT"])
        import json
        obj = json.loads(report.to_json())
        assert set(obj) == {
            "record_id", "compression_ratio", "edge_variance", "bpp",
            "ai_score", "watermark_score", "greasy_score", "decision", "violations",
        }


@settings(max_examples=50)
@given(
    ratio=st.floats(0, 2), var=st.floats(0, 5000), bpp=st.floats(0, 10),
    ai=st.floats(0, 1), wm=st.floats(0, 1), greasy=st.floats(0, 1),
)
def test_stricter_profile_pass_subset(ratio, var, bpp, ai, wm, greasy):
    scores = dict(compression_ratio=ratio, edge_variance=var, bpp=bpp,
                  ai_score=ai, watermark_score=wm, greasy_score=greasy)
    for earlier, later in (("PT", "CT"), ("CT", "SFT")):
        if not DEFAULT_PROFILES[later].violations(**scores):
            assert not DEFAULT_PROFILES[earlier].violations(**scores)
