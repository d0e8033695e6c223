"""Binary PGM (P5) and PPM (P6) rasters with 8-bit samples."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Tuple

import numpy as np

from ..core.errors import DimensionError, ImageFormatError

logger = logging.getLogger(__name__)

MAXVAL = 255
CHANNELS = {b"P5": 1, b"P6": 3}


def _header(raw: bytes) -> Tuple[bytes, List[int], int]:
    magic = raw[:2]
    if magic not in CHANNELS:
        raise ImageFormatError(f"unsupported image format: magic bytes {magic!r}", magic=magic)
    values: List[int] = []
    pos = 2
    while len(values) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and raw[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise ImageFormatError(f"truncated or malformed {magic.decode()} header", magic=magic)
        values.append(int(raw[start:pos]))
    if pos >= len(raw) or not raw[pos:pos + 1].isspace():
        raise ImageFormatError(f"truncated {magic.decode()} header", magic=magic)
    return magic, values, pos + 1


def decode_pnm(raw: bytes) -> np.ndarray:
    """Decode to floats in [0, 1]: (H, W) for P5, (H, W, 3) for P6."""
    magic, (width, height, maxval), offset = _header(raw)
    if maxval != MAXVAL:
        raise ImageFormatError(f"only maxval {MAXVAL} is supported, got {maxval}", magic=magic)
    if width < 1 or height < 1:
        raise ImageFormatError(f"image has no pixels ({width}x{height})", magic=magic)
    channels = CHANNELS[magic]
    expected = width * height * channels
    payload = raw[offset:offset + expected]
    if len(payload) < expected:
        raise ImageFormatError(
            f"truncated payload: expected {expected} bytes, got {len(payload)}", magic=magic
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / MAXVAL
    shape = (height, width) if channels == 1 else (height, width, channels)
    return pixels.reshape(shape)


def encode_pnm(image: np.ndarray) -> bytes:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise DimensionError(f"PNM holds 1 or 3 channels, got shape {img.shape}")
    if img.shape[0] == 0 or img.shape[1] == 0:
        raise DimensionError(f"cannot encode an empty image of shape {img.shape}")
    samples = np.round(np.clip(img, 0.0, 1.0) * MAXVAL).astype(np.uint8)
    header = b"%s\n%d %d\n%d\n" % (magic, img.shape[1], img.shape[0], MAXVAL)
    return header + samples.tobytes()


def read_image(path: Path) -> np.ndarray:
    path = Path(path)
    try:
        image = decode_pnm(path.read_bytes())
    except ImageFormatError as e:
        e.args = (f"{path}: {e}",)
        raise
    logger.debug(f"Read {path} with shape {image.shape}")
    return image


def write_image(path: Path, image: np.ndarray) -> None:
    """Write an image with values in [0, 1]; out-of-range values are clipped."""
    Path(path).write_bytes(encode_pnm(image))
