"""Seeded, splittable random streams.

One root seed feeds independent substreams keyed by purpose ("data", "init",
"shuffle", ...) and optional integer indices, so adding draws in one place never
shifts the numbers seen somewhere else.
"""

from __future__ import annotations

import zlib

import numpy as np


def purpose_key(purpose: str) -> int:
    """Stable 32-bit key for a purpose name."""
    return zlib.crc32(purpose.encode("utf-8")) & 0xFFFFFFFF


def substream(seed: int, purpose: str, *index: int) -> np.random.Generator:
    """Return a PCG64 generator for ``(seed, purpose, *index)``.

    Args:
        seed: Root seed (any non-negative 64-bit integer)
        purpose: Name of the consumer, e.g. ``"data"`` or ``"init"``
        index: Optional integers selecting a child stream (e.g. image index)
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    words = [seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF, purpose_key(purpose)]
    words.extend(int(i) for i in index)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))
