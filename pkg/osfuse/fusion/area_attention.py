"""Area-attention fusion of two residual-enhanced modality maps.

Each map is cut into ``k`` bands along rows (horizontal) or columns
(vertical). Inside a band, modality A queries modality B and the other way
round. The two attended maps and the mean of the inputs are averaged into one
fused map.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ..core.errors import ContractError, InputError
from ..core.tensor import ArrayLike, Tensor, as_tensor, concat, pad_axis, parameter, softmax_lastdim
from .scan_orders import FeatureMap

logger = logging.getLogger(__name__)

Grid = Union[np.ndarray, Tensor]


class AreaAxis(str, Enum):
    HORIZONTAL = "horizontal"  # bands of rows
    VERTICAL = "vertical"      # bands of columns

    @classmethod
    def parse(cls, value: Union[str, "AreaAxis"]) -> "AreaAxis":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError as e:
            raise InputError(f"unknown area axis '{value}' (choose horizontal or vertical)") from e


@dataclass
class AreaConfig:
    k: int = 4
    axis: AreaAxis = AreaAxis.HORIZONTAL
    head_dim: int = 8

    def __post_init__(self):
        self.axis = AreaAxis.parse(self.axis)
        if self.k < 1:
            raise InputError(f"area block count k must be >= 1, got {self.k}")
        if self.head_dim < 1:
            raise InputError(f"head_dim must be >= 1, got {self.head_dim}")

    @property
    def grid_axis(self) -> int:
        """Axis of an (..., H, W, C) map that gets partitioned."""
        return -3 if self.axis is AreaAxis.HORIZONTAL else -2


@dataclass
class AFMParams:
    w_q: Tensor  # (C, head_dim)
    w_k: Tensor  # (C, head_dim)

    def __post_init__(self):
        if self.w_q.shape != self.w_k.shape or self.w_q.ndim != 2:
            raise ContractError(f"query/key projections must share a 2-D shape, got "
                                f"{self.w_q.shape} and {self.w_k.shape}")

    @property
    def head_dim(self) -> int:
        return self.w_q.shape[1]

    @classmethod
    def create(cls, channels: int, head_dim: int, rng: np.random.Generator) -> "AFMParams":
        scale = 1.0 / np.sqrt(channels)
        return cls(
            w_q=parameter(rng.normal(0.0, scale, (channels, head_dim))),
            w_k=parameter(rng.normal(0.0, scale, (channels, head_dim))),
        )

    def parameters(self) -> Dict[str, Tensor]:
        return {"w_q": self.w_q, "w_k": self.w_k}


@dataclass
class FlopCounter:
    """Running count of multiply-adds and exponentials spent in attention."""
    count: int = 0

    def add(self, flops: int) -> None:
        self.count += int(flops)

    def reset(self) -> None:
        self.count = 0


def _data(fm) -> Grid:
    return fm.data if isinstance(fm, FeatureMap) else fm


def _padded(x: Grid, axis: int, k: int) -> Tuple[Grid, int]:
    length = x.shape[axis]
    extra = (-length) % k
    if extra == 0:
        return x, length
    if isinstance(x, Tensor):
        return pad_axis(x, axis, 0, extra), length
    widths = [(0, 0)] * x.ndim
    widths[axis] = (0, extra)
    return np.pad(x, widths), length


def _band(x: Grid, axis: int, start: int, stop: int) -> Grid:
    index = [slice(None)] * x.ndim
    index[axis % x.ndim] = slice(start, stop)
    return x[tuple(index)]


def area_partition(fm, cfg: AreaConfig) -> List[Grid]:
    """Split a map into ``cfg.k`` equal bands, zero-padding the partition axis if needed."""
    x = _data(fm)
    axis = cfg.grid_axis
    if x.ndim < 3 or x.shape[-3] == 0 or x.shape[-2] == 0:
        raise ContractError(f"cannot partition an empty or non-grid map of shape {x.shape}")
    padded, _ = _padded(x, axis, cfg.k)
    size = padded.shape[axis] // cfg.k
    return [_band(padded, axis, i * size, (i + 1) * size) for i in range(cfg.k)]


def area_merge(blocks: List[Grid], cfg: AreaConfig, length: Optional[int] = None) -> Grid:
    """Concatenate bands back along the partition axis and crop to ``length``."""
    axis = cfg.grid_axis
    if any(isinstance(b, Tensor) for b in blocks):
        merged = concat(blocks, axis=axis)
    else:
        merged = np.concatenate(blocks, axis=axis)
    if length is not None and merged.shape[axis] != length:
        merged = _band(merged, axis, 0, length)
    return merged


def _to_tokens(x: Tensor, cfg: AreaConfig) -> Tuple[Tensor, Tuple[int, ...]]:
    """(..., H, W, C) → (..., k, m, C) with one token row per band."""
    padded, _ = _padded(x, cfg.grid_axis, cfg.k)
    lead = padded.shape[:-3]
    rows, cols, channels = padded.shape[-3:]
    k = cfg.k
    if cfg.axis is AreaAxis.HORIZONTAL:
        return padded.reshape(lead + (k, (rows // k) * cols, channels)), padded.shape
    n = len(lead)
    split = padded.reshape(lead + (rows, k, cols // k, channels))
    moved = split.transpose(tuple(range(n)) + (n + 1, n, n + 2, n + 3))
    return moved.reshape(lead + (k, rows * (cols // k), channels)), padded.shape


def _from_tokens(tokens: Tensor, cfg: AreaConfig, padded_shape: Tuple[int, ...],
                 shape: Tuple[int, ...]) -> Tensor:
    lead = padded_shape[:-3]
    rows, cols, channels = padded_shape[-3:]
    k = cfg.k
    if cfg.axis is AreaAxis.HORIZONTAL:
        grid = tokens.reshape(padded_shape)
    else:
        n = len(lead)
        split = tokens.reshape(lead + (k, rows, cols // k, channels))
        grid = split.transpose(tuple(range(n)) + (n + 1, n, n + 2, n + 3)).reshape(padded_shape)
    axis = cfg.grid_axis
    if grid.shape[axis] != shape[axis]:
        grid = _band(grid, axis, 0, shape[axis])
    return grid


def attention_weights(queries: ArrayLike, keys: ArrayLike, params: AFMParams,
                      counter: Optional[FlopCounter] = None) -> Tensor:
    """Scaled dot-product weights (..., m, m) between projected token sets."""
    q = as_tensor(queries) @ params.w_q
    k = as_tensor(keys) @ params.w_k
    scores = (q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(params.head_dim))
    if counter is not None:
        m, channels = q.shape[-2], as_tensor(queries).shape[-1]
        groups = int(np.prod(q.shape[:-2], dtype=np.int64))
        d = params.head_dim
        # two projections, the score matrix, then softmax (exp, sum, divide)
        counter.add(groups * (2 * 2 * m * channels * d + 2 * m * m * d + 3 * m * m))
    return softmax_lastdim(scores)


def _cross_attend(queries: Tensor, values: Tensor, params: AFMParams,
                  counter: Optional[FlopCounter]) -> Tensor:
    weights = attention_weights(queries, values, params, counter)
    if counter is not None:
        m, channels = values.shape[-2:]
        groups = int(np.prod(values.shape[:-2], dtype=np.int64))
        counter.add(groups * 2 * m * m * channels)
    return weights @ values


def afm_fuse(O, S, params: AFMParams, cfg: AreaConfig,
             counter: Optional[FlopCounter] = None):
    """Fuse two (..., H, W, C) maps with banded cross-attention.

    Queries and keys are projected to ``cfg.head_dim``; values are the raw
    tokens so a constant input passes through unchanged.

    Returns:
        Fused map of the input shape (a FeatureMap when given FeatureMaps)
    """
    level = O.level if isinstance(O, FeatureMap) else None
    o, s = as_tensor(_data(O)), as_tensor(_data(S))
    if o.shape != s.shape:
        raise ContractError(f"modalities must share a shape, got {o.shape} and {s.shape}")
    if o.ndim < 3:
        raise ContractError(f"expected (..., H, W, C) maps, got {o.shape}")
    if o.shape[-1] != params.w_q.shape[0]:
        raise ContractError(f"maps have {o.shape[-1]} channels, projections expect {params.w_q.shape[0]}")

    o_tokens, padded_shape = _to_tokens(o, cfg)
    s_tokens, _ = _to_tokens(s, cfg)
    o_attends_s = _cross_attend(o_tokens, s_tokens, params, counter)
    s_attends_o = _cross_attend(s_tokens, o_tokens, params, counter)
    fused = (o_attends_s + s_attends_o + (o_tokens + s_tokens) * 0.5) * (1.0 / 3.0)
    out = _from_tokens(fused, cfg, padded_shape, o.shape)
    return FeatureMap(out, level) if level is not None else out
