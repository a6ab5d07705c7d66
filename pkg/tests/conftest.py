"""Shared fixtures: synthetic images and corpus builders."""

from __future__ import annotations

import io

import numpy as np
import pytest
from PIL import Image

from imgcurate.imgio import ImageMeta, ImageFormat, PixelBuffer


def encode_png(arr: np.ndarray) -> bytes:
    """Encode an (h, w), (h, w, 1), (h, w, 3) or (h, w, 4) uint8/uint16 array."""
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.dtype == np.uint16:
        im = Image.fromarray(arr)  # infers I;16
    elif arr.ndim == 2:
        im = Image.fromarray(arr, mode="L")
    elif arr.shape[2] == 3:
        im = Image.fromarray(arr, mode="RGB")
    else:
        im = Image.fromarray(arr, mode="RGBA")
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()


def encode_jpeg(arr: np.ndarray, quality: int = 85) -> bytes:
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    mode = "L" if arr.ndim == 2 else "RGB"
    im = Image.fromarray(arr, mode=mode)
    buf = io.BytesIO()
    im.save(buf, format="JPEG", quality=quality)
    return buf.getvalue()


def constant_image(width: int, height: int, value: int = 128, channels: int = 3) -> np.ndarray:
    return np.full((height, width, channels), value, dtype=np.uint8)


def noise_image(width: int, height: int, seed: int, channels: int = 3) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(height, width, channels), dtype=np.uint8)


def photo_like_image(width: int, height: int, seed: int) -> np.ndarray:
    """Gradient + texture + noise: passes permissive thresholds like a photo."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    base = 90 + 60 * np.sin(x / 7.0) + 50 * np.cos(y / 5.0) + 0.3 * x
    arr = np.stack([base, base * 0.8 + 20, base * 0.6 + 40], axis=2)
    arr += rng.normal(0, 18, size=arr.shape)
    return np.clip(arr, 0, 255).astype(np.uint8)


def buffer_from_array(arr: np.ndarray, encoded_size: int = 1000,
                      fmt: ImageFormat = ImageFormat.PNG) -> PixelBuffer:
    if arr.ndim == 2:
        arr = arr[:, :, None]
    h, w, c = arr.shape
    bit_depth = 16 if arr.dtype == np.uint16 else 8
    meta = ImageMeta(width=w, height=h, channels=c, bit_depth=bit_depth,
                     encoded_size=encoded_size, format=fmt)
    return PixelBuffer(meta=meta, samples=arr)


@pytest.fixture
def gray_checker() -> np.ndarray:
    arr = np.zeros((8, 8), dtype=np.uint8)
    arr[::2, ::2] = 255
    arr[1::2, 1::2] = 255
    return arr
