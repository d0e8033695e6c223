"""Patch sequences for cross-modal scanning.

Feature maps are flattened row-major into sequences of channel vectors. Two
modalities are either concatenated or interleaved so that corresponding
patches sit next to each other, and a space-filling scan order then decides
in which order the interleaved pairs are visited.

All functions accept numpy arrays or :class:`~osfuse.core.tensor.Tensor`
objects with optional leading batch axes and return the same kind.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import List, Optional, Tuple, Union

import numpy as np

from ..core.errors import ContractError, DimensionError, InputError
from ..core.tensor import Tensor, concat, stack

Sequence_ = Union[np.ndarray, Tensor]

PYRAMID_LEVELS = (3, 4, 5)


class ScanKind(str, Enum):
    BIDIRECTIONAL = "bidirectional"
    ZORDER = "zorder"
    ZIGZAG = "zigzag"
    HILBERT = "hilbert"

    @classmethod
    def parse(cls, value: Union[str, "ScanKind"]) -> "ScanKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError as e:
            choices = ", ".join(k.value for k in cls)
            raise InputError(f"unknown scan kind '{value}' (choose from {choices})") from e


@dataclass
class FeatureMap:
    """H×W×C activations (optionally batched) at pyramid level 3, 4 or 5."""
    data: Sequence_
    level: int = 3

    def __post_init__(self):
        if self.level not in PYRAMID_LEVELS:
            raise ContractError(f"pyramid level must be one of {PYRAMID_LEVELS}, got {self.level}")
        shape = self.data.shape
        if len(shape) < 3 or shape[-3] == 0 or shape[-2] == 0:
            raise DimensionError(f"feature map needs a non-empty H×W×C grid, got shape {shape}")

    @property
    def height(self) -> int:
        return self.data.shape[-3]

    @property
    def width(self) -> int:
        return self.data.shape[-2]

    @property
    def channels(self) -> int:
        return self.data.shape[-1]


@dataclass(eq=False)
class ScanPermutation:
    """A visit order over ``len(order)`` cells; ``paired`` holds a second pass if any."""
    kind: Optional[ScanKind]
    order: np.ndarray
    paired: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        self.order = _frozen(self.order)
        if self.paired is not None:
            self.paired = _frozen(self.paired)
            if len(self.paired) != len(self.order):
                raise ContractError("paired order must have the same length as the order")

    def __len__(self) -> int:
        return len(self.order)

    @classmethod
    def identity(cls, n: int) -> "ScanPermutation":
        return cls(kind=None, order=np.arange(n))

    def passes(self) -> List["ScanPermutation"]:
        """One single-order permutation per scan pass."""
        result = [ScanPermutation(self.kind, self.order)]
        if self.paired is not None:
            result.append(ScanPermutation(self.kind, self.paired))
        return result

    def cells(self, cols: int) -> List[Tuple[int, int]]:
        """Visit order as (row, col) pairs for a grid with ``cols`` columns."""
        return [(int(i) // cols, int(i) % cols) for i in self.order]


def _frozen(values) -> np.ndarray:
    order = np.array(values, dtype=np.intp)
    if order.ndim != 1 or not np.array_equal(np.sort(order), np.arange(order.size)):
        raise ContractError("scan order must be a permutation of 0..n-1")
    order.flags.writeable = False
    return order


def _data(seq) -> Sequence_:
    return seq.data if isinstance(seq, FeatureMap) else seq


def _reshape(x: Sequence_, shape: Tuple[int, ...]) -> Sequence_:
    return x.reshape(shape) if isinstance(x, Tensor) else np.reshape(x, shape)


def _take(x: Sequence_, indices: np.ndarray) -> Sequence_:
    if isinstance(x, Tensor):
        return x.take(indices, axis=-2)
    return np.take(x, indices, axis=-2)


# ------------------------------------------------------------- sequence ops
def flatten_row_major(fm) -> Sequence_:
    """(..., H, W, C) map → (..., H*W, C) sequence; entry i is cell (i // W, i % W)."""
    x = _data(fm)
    height, width, channels = x.shape[-3:]
    return _reshape(x, tuple(x.shape[:-3]) + (height * width, channels))


def unflatten(seq: Sequence_, height: int, width: int) -> Sequence_:
    """Inverse of :func:`flatten_row_major`."""
    if seq.shape[-2] != height * width:
        raise ContractError(f"sequence of length {seq.shape[-2]} does not fill a {height}x{width} grid")
    return _reshape(seq, tuple(seq.shape[:-2]) + (height, width, seq.shape[-1]))


def concat_traditional(X: Sequence_, Y: Sequence_) -> Sequence_:
    """All of X followed by all of Y."""
    if X.shape[-1] != Y.shape[-1]:
        raise DimensionError(f"channel mismatch: {X.shape[-1]} vs {Y.shape[-1]}")
    if isinstance(X, Tensor) or isinstance(Y, Tensor):
        return concat([X, Y], axis=-2)
    return np.concatenate([X, Y], axis=-2)


def interleave_iir(X: Sequence_, Y: Sequence_) -> Sequence_:
    """[x1, y1, x2, y2, ...]: even positions from X, odd positions from Y."""
    if X.shape[-2] != Y.shape[-2]:
        raise ContractError(f"interleaving needs equal lengths, got {X.shape[-2]} and {Y.shape[-2]}")
    if X.shape[-1] != Y.shape[-1]:
        raise DimensionError(f"channel mismatch: {X.shape[-1]} vs {Y.shape[-1]}")
    n, channels = X.shape[-2:]
    out_shape = tuple(X.shape[:-2]) + (2 * n, channels)
    if isinstance(X, Tensor) or isinstance(Y, Tensor):
        return stack([X, Y], axis=-2).reshape(out_shape)
    return np.stack([X, Y], axis=-2).reshape(out_shape)


def deinterleave(Z: Sequence_) -> Tuple[Sequence_, Sequence_]:
    """Split an interleaved sequence back into its two modalities."""
    length = Z.shape[-2]
    if length % 2:
        raise ContractError(f"cannot deinterleave odd length {length}")
    return _take(Z, np.arange(0, length, 2)), _take(Z, np.arange(1, length, 2))


def apply_permutation(seq: Sequence_, p: Union[ScanPermutation, np.ndarray],
                      inverse: bool = False) -> Sequence_:
    """Gather ``out[i] = seq[order[i]]``; ``inverse`` undoes it."""
    order = p.order if isinstance(p, ScanPermutation) else np.asarray(p, dtype=np.intp)
    if seq.shape[-2] != len(order):
        raise ContractError(f"sequence length {seq.shape[-2]} != permutation length {len(order)}")
    return _take(seq, np.argsort(order) if inverse else order)


def pairwise(p: ScanPermutation) -> ScanPermutation:
    """Lift a cell order to the interleaved sequence, moving (x_i, y_i) pairs together."""
    lift = lambda order: np.stack([2 * order, 2 * order + 1], axis=1).ravel()  # noqa: E731
    paired = None if p.paired is None else lift(p.paired)
    return ScanPermutation(p.kind, lift(p.order), paired)


# ------------------------------------------------------------- scan orders
def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


@lru_cache(maxsize=None)
def _hilbert_square(side: int) -> Tuple[Tuple[int, int], ...]:
    cells = []
    for d in range(side * side):
        x = y = 0
        t = d
        s = 1
        while s < side:
            rx = 1 & (t // 2)
            ry = 1 & (t ^ rx)
            if ry == 0:
                if rx == 1:
                    x, y = s - 1 - x, s - 1 - y
                x, y = y, x
            x += s * rx
            y += s * ry
            t //= 4
            s *= 2
        cells.append((x, y))
    return tuple(cells)


@lru_cache(maxsize=None)
def _morton_square(side: int) -> Tuple[Tuple[int, int], ...]:
    bits = max(1, side.bit_length())

    def code(r: int, c: int) -> int:
        value = 0
        for b in range(bits):
            value |= ((c >> b) & 1) << (2 * b)
            value |= ((r >> b) & 1) << (2 * b + 1)
        return value

    cells = [(r, c) for r in range(side) for c in range(side)]
    return tuple(sorted(cells, key=lambda rc: code(*rc)))


def _symmetry(r: int, c: int, side: int, direction: int) -> Tuple[int, int]:
    for _ in range(direction % 4):
        r, c = c, side - 1 - r
    if direction >= 4:
        c = side - 1 - c
    return r, c


def _curve_order(square: Tuple[Tuple[int, int], ...], side: int, rows: int, cols: int,
                 direction: int = 0) -> np.ndarray:
    order = []
    for r, c in square:
        r, c = _symmetry(r, c, side, direction)
        if r < rows and c < cols:
            order.append(r * cols + c)
    return np.array(order, dtype=np.intp)


def scan_permutation(kind: Union[ScanKind, str], rows: int, cols: int,
                     direction: int = 0) -> ScanPermutation:
    """Visit order over a rows×cols grid.

    Args:
        kind: Scan family
        rows: Grid height
        cols: Grid width
        direction: Hilbert symmetry index 0-7 (rotations, then mirrored rotations)
    """
    kind = ScanKind.parse(kind)
    if rows < 1 or cols < 1:
        raise ContractError(f"grid must be at least 1x1, got {rows}x{cols}")
    if not 0 <= direction <= 7:
        raise ContractError(f"direction must be in 0..7, got {direction}")
    if kind is ScanKind.BIDIRECTIONAL:
        forward = np.arange(rows * cols)
        return ScanPermutation(kind, forward, forward[::-1].copy())
    if kind is ScanKind.ZIGZAG:
        order = [r * cols + (c if r % 2 == 0 else cols - 1 - c)
                 for r in range(rows) for c in range(cols)]
        return ScanPermutation(kind, np.array(order))
    side = _next_pow2(max(rows, cols))
    if kind is ScanKind.ZORDER:
        return ScanPermutation(kind, _curve_order(_morton_square(side), side, rows, cols))
    return ScanPermutation(kind, _curve_order(_hilbert_square(side), side, rows, cols, direction))


def vertical_permutation(kind: Union[ScanKind, str], rows: int, cols: int,
                         direction: int = 0) -> ScanPermutation:
    """The same scan family run over the transposed grid, expressed in row-major cell ids."""
    transposed = scan_permutation(kind, cols, rows, direction)
    to_original = lambda order: (order % rows) * cols + order // rows  # noqa: E731
    paired = None if transposed.paired is None else to_original(transposed.paired)
    return ScanPermutation(transposed.kind, to_original(transposed.order), paired)
