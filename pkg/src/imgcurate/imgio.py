"""Container header parsing and pixel decoding.

``decode_metadata`` reads dimensions, channel count, bit depth and the
container tag straight from the file header, without touching pixel data.
``decode_pixels`` does the full decode through Pillow and yields a
``PixelBuffer`` with row-major channel-interleaved samples.
"""

from __future__ import annotations

import enum
import io
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import CorruptHeader, DecodeFailure, EmptyImage, UnsupportedFormat

Image.MAX_IMAGE_PIXELS = None


class ImageFormat(str, enum.Enum):
    JPEG = "JPEG"
    PNG = "PNG"
    WEBP = "WEBP"
    OTHER = "OTHER"


@dataclass(frozen=True)
class ImageMeta:
    width: int
    height: int
    channels: int
    bit_depth: int
    encoded_size: int
    format: ImageFormat

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1 or self.encoded_size < 1:
            raise CorruptHeader(
                f"non-positive dimensions: {self.width}x{self.height}, {self.encoded_size} bytes"
            )
        if self.channels not in (1, 3, 4):
            raise CorruptHeader(f"unsupported channel count: {self.channels}")
        if self.bit_depth not in (8, 16):
            raise CorruptHeader(f"unsupported bit depth: {self.bit_depth}")

    @property
    def pixel_count(self) -> int:
        return self.width * self.height

    @property
    def theoretical_size(self) -> float:
        """Uncompressed byte size implied by resolution, channels and bit depth."""
        return self.width * self.height * self.channels * self.bit_depth / 8.0


@dataclass
class PixelBuffer:
    """Decoded samples, shape (height, width, channels), dtype uint8 or uint16."""

    meta: ImageMeta
    samples: np.ndarray

    def __post_init__(self) -> None:
        expected = (self.meta.height, self.meta.width, self.meta.channels)
        if self.samples.shape != expected:
            raise DecodeFailure(f"sample shape {self.samples.shape} != {expected}")
        wanted = np.uint8 if self.meta.bit_depth == 8 else np.uint16
        if self.samples.dtype != wanted:
            raise DecodeFailure(f"sample dtype {self.samples.dtype} != {wanted}")


_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
# PNG color type -> channel count in this toolkit's 1/3/4 taxonomy.
# Palette decodes to RGB; grayscale+alpha is treated as alpha-bearing (4).
_PNG_CHANNELS = {0: 1, 2: 3, 3: 3, 4: 4, 6: 4}


def _parse_png(blob: bytes) -> ImageMeta:
    # signature(8) + length(4) + "IHDR"(4) + IHDR payload(13)
    if len(blob) < 33:
        raise CorruptHeader("PNG blob too short for IHDR")
    if blob[12:16] != b"IHDR":
        raise CorruptHeader("PNG missing IHDR chunk")
    width, height = struct.unpack(">II", blob[16:24])
    bit_depth = blob[24]
    color_type = blob[25]
    if color_type not in _PNG_CHANNELS:
        raise CorruptHeader(f"unknown PNG color type {color_type}")
    if bit_depth not in (1, 2, 4, 8, 16):
        raise CorruptHeader(f"bad PNG bit depth {bit_depth}")
    return ImageMeta(
        width=width,
        height=height,
        channels=_PNG_CHANNELS[color_type],
        bit_depth=16 if bit_depth == 16 else 8,
        encoded_size=len(blob),
        format=ImageFormat.PNG,
    )


_JPEG_SOF_MARKERS = frozenset(
    # SOF0-SOF15 minus DHT/JPG/DAC which share the range
    m for m in range(0xC0, 0xD0) if m not in (0xC4, 0xC8, 0xCC)
)


def _parse_jpeg(blob: bytes) -> ImageMeta:
    pos = 2
    n = len(blob)
    while pos + 4 <= n:
        if blob[pos] != 0xFF:
            pos += 1
            continue
        marker = blob[pos + 1]
        if marker == 0xFF:
            pos += 1
            continue
        if marker in (0x01,) or 0xD0 <= marker <= 0xD9:
            pos += 2
            continue
        seg_len = struct.unpack(">H", blob[pos + 2:pos + 4])[0]
        if marker in _JPEG_SOF_MARKERS:
            if pos + 4 + 6 > n:
                raise CorruptHeader("truncated JPEG SOF segment")
            precision = blob[pos + 4]
            height, width = struct.unpack(">HH", blob[pos + 5:pos + 9])
            components = blob[pos + 9]
            channels = {1: 1, 3: 3, 4: 4}.get(components)
            if channels is None:
                raise CorruptHeader(f"unsupported JPEG component count {components}")
            if precision not in (8, 16):
                raise CorruptHeader(f"unsupported JPEG precision {precision}")
            return ImageMeta(
                width=width,
                height=height,
                channels=channels,
                bit_depth=precision,
                encoded_size=len(blob),
                format=ImageFormat.JPEG,
            )
        pos += 2 + seg_len
    raise CorruptHeader("JPEG has no SOF marker")


def _parse_webp(blob: bytes) -> ImageMeta:
    if len(blob) < 30:
        raise CorruptHeader("WEBP blob too short")
    chunk = blob[12:16]
    if chunk == b"VP8X":
        flags = blob[20]
        has_alpha = bool(flags & 0x10)
        width = 1 + int.from_bytes(blob[24:27], "little")
        height = 1 + int.from_bytes(blob[27:30], "little")
        channels = 4 if has_alpha else 3
    elif chunk == b"VP8 ":
        # lossy bitstream: 3-byte frame tag, then signature 9D 01 2A, then dims
        if blob[23:26] != b"\x9d\x01\x2a":
            raise CorruptHeader("bad VP8 keyframe signature")
        width = struct.unpack("<H", blob[26:28])[0] & 0x3FFF
        height = struct.unpack("<H", blob[28:30])[0] & 0x3FFF
        channels = 3
    elif chunk == b"VP8L":
        if blob[20] != 0x2F:
            raise CorruptHeader("bad VP8L signature byte")
        bits = int.from_bytes(blob[21:25], "little")
        width = (bits & 0x3FFF) + 1
        height = ((bits >> 14) & 0x3FFF) + 1
        channels = 4 if (bits >> 28) & 0x1 else 3
    else:
        raise CorruptHeader(f"unknown WEBP chunk {chunk!r}")
    return ImageMeta(
        width=width,
        height=height,
        channels=channels,
        bit_depth=8,
        encoded_size=len(blob),
        format=ImageFormat.WEBP,
    )


def decode_metadata(blob: bytes, *, allow_webp: bool = False) -> ImageMeta:
    """Read container-declared metadata without a full pixel decode.

    Raises CorruptHeader for empty/truncated input and UnsupportedFormat for
    containers outside JPEG/PNG (WEBP only when ``allow_webp`` is set).
    """
    if not blob:
        raise CorruptHeader("empty blob")
    if blob.startswith(_PNG_SIGNATURE):
        return _parse_png(blob)
    if blob[:2] == b"\xff\xd8":
        return _parse_jpeg(blob)
    if blob[:4] == b"RIFF" and blob[8:12] == b"WEBP":
        if not allow_webp:
            raise UnsupportedFormat("WEBP support is disabled")
        return _parse_webp(blob)
    raise UnsupportedFormat("unrecognized container signature")


def decode_pixels(blob: bytes, *, allow_webp: bool = False) -> PixelBuffer:
    """Fully decode a blob into a PixelBuffer; metadata comes from the header."""
    meta = decode_metadata(blob, allow_webp=allow_webp)
    try:
        with Image.open(io.BytesIO(blob)) as im:
            im.load()
            arr = _image_to_array(im)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DecodeFailure(f"pixel decode failed: {exc}") from exc
    if arr.size == 0:
        raise EmptyImage("decoded image has no pixels")
    h, w, c = arr.shape
    if (w, h) != (meta.width, meta.height) or c != meta.channels:
        # Pillow may widen/narrow modes (e.g. palette -> RGB); trust the decode
        # for channels but keep header dims authoritative.
        if (w, h) != (meta.width, meta.height):
            raise DecodeFailure(
                f"decoded dims {w}x{h} disagree with header {meta.width}x{meta.height}"
            )
        meta = ImageMeta(
            width=meta.width,
            height=meta.height,
            channels=c,
            bit_depth=16 if arr.dtype == np.uint16 else 8,
            encoded_size=meta.encoded_size,
            format=meta.format,
        )
    return PixelBuffer(meta=meta, samples=arr)


def _image_to_array(im: Image.Image) -> np.ndarray:
    mode = im.mode
    if mode in ("I;16", "I;16B", "I;16L"):
        arr = np.asarray(im, dtype=np.uint16)
        return arr[:, :, None]
    if mode == "I":
        arr = np.asarray(im, dtype=np.int32)
        return np.clip(arr, 0, 65535).astype(np.uint16)[:, :, None]
    if mode == "1":
        arr = (np.asarray(im, dtype=np.uint8) * 255).astype(np.uint8)
        return arr[:, :, None]
    if mode == "L":
        return np.asarray(im, dtype=np.uint8)[:, :, None]
    if mode == "LA":
        im = im.convert("RGBA")
    elif mode == "P":
        im = im.convert("RGB")
    elif mode == "CMYK":
        im = im.convert("RGB")
    elif mode not in ("RGB", "RGBA"):
        im = im.convert("RGB")
    arr = np.asarray(im, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr
