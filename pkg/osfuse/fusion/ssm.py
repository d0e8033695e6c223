"""Selective state-space scan and the cross-modal interaction built on it.

The scan keeps a diagonal state per channel::

    h_t = a_bar_t * h_{t-1} + b_bar_t * x_t      (h_0 = 0)
    y_t = sum_n c_t[n] * h_t[:, n] + d * x_t

with ``a_bar_t = exp(delta_t * A)`` and ``b_bar_t = delta_t * B_t``. ``B_t``,
``C_t`` and ``delta_t`` are linear functions of the input token, which is what
makes the scan selective. The recurrence runs as one fused autograd node with a
hand-written reverse pass.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.errors import ContractError, InputError
from ..core.settings import SEQUENCE_MODES
from ..core.tensor import ArrayLike, Tensor, as_tensor, clip, custom, exp, parameter, softplus
from .scan_orders import (
    PYRAMID_LEVELS,
    FeatureMap,
    ScanKind,
    ScanPermutation,
    apply_permutation,
    concat_traditional,
    deinterleave,
    flatten_row_major,
    interleave_iir,
    pairwise,
    scan_permutation,
    vertical_permutation,
)

logger = logging.getLogger(__name__)

DELTA_INIT = 0.1
# softplus underflows to 0 for pre-activations below about -745
DELTA_MIN = 1e-6


@dataclass
class SSMParams:
    """Trainable parameters of one directional scan.

    ``A = -exp(a_log)`` keeps the continuous state matrix strictly negative
    whatever value the optimizer leaves in ``a_log``.
    """
    a_log: Tensor     # (N,)
    w_delta: Tensor   # (C, C)
    b_delta: Tensor   # (C,)
    w_b: Tensor       # (C, N)
    b_b: Tensor       # (N,)
    w_c: Tensor       # (C, N)
    b_c: Tensor       # (N,)
    d: Tensor         # (C,)

    def __post_init__(self):
        n, c = self.state_dim, self.channels
        expected = {
            "w_delta": (c, c), "b_delta": (c,), "w_b": (c, n), "b_b": (n,),
            "w_c": (c, n), "b_c": (n,), "d": (c,),
        }
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise ContractError(f"SSM parameter '{name}' must have shape {shape}, got {actual}")

    @property
    def state_dim(self) -> int:
        return self.a_log.shape[0]

    @property
    def channels(self) -> int:
        return self.d.shape[0]

    @property
    def a(self) -> Tensor:
        return -exp(self.a_log)

    @classmethod
    def create(cls, channels: int, state_dim: int, rng: np.random.Generator) -> "SSMParams":
        """Standard initialisation: A = -(1 + n), softplus(delta bias) = 0.1, unit skip."""
        if channels < 1 or state_dim < 1:
            raise ContractError(f"channels and state_dim must be >= 1, got {channels}, {state_dim}")
        scale = 1.0 / np.sqrt(channels)
        return cls(
            a_log=parameter(np.log1p(np.arange(state_dim, dtype=np.float64))),
            w_delta=parameter(rng.normal(0.0, 0.1 * scale, (channels, channels))),
            b_delta=parameter(np.full(channels, np.log(np.expm1(DELTA_INIT)))),
            w_b=parameter(rng.normal(0.0, scale, (channels, state_dim))),
            b_b=parameter(np.zeros(state_dim)),
            w_c=parameter(rng.normal(0.0, scale, (channels, state_dim))),
            b_c=parameter(np.zeros(state_dim)),
            d=parameter(np.ones(channels)),
        )

    @classmethod
    def from_arrays(cls, **arrays: ArrayLike) -> "SSMParams":
        return cls(**{name: parameter(value) for name, value in arrays.items()})

    def parameters(self) -> Dict[str, Tensor]:
        return {
            "a_log": self.a_log, "w_delta": self.w_delta, "b_delta": self.b_delta,
            "w_b": self.w_b, "b_b": self.b_b, "w_c": self.w_c, "b_c": self.b_c, "d": self.d,
        }

    def discretize(self, delta: ArrayLike, b: ArrayLike) -> Tuple[Tensor, Tensor]:
        return ssm_discretize(self.a, delta, b)


def ssm_discretize(a: ArrayLike, delta: ArrayLike, b: ArrayLike) -> Tuple[Tensor, Tensor]:
    """Zero-order-hold discretization of a diagonal state matrix.

    Args:
        a: (N,) diagonal of the continuous state matrix
        delta: (..., L, C) positive step sizes
        b: (..., L, N) input projections

    Returns:
        a_bar, b_bar, both (..., L, C, N)
    """
    a, delta, b = as_tensor(a), as_tensor(delta), as_tensor(b)
    if delta.size and np.min(delta.data) <= 0:
        raise ContractError(f"step sizes must be positive, got min {np.min(delta.data)}")
    step = delta.reshape(delta.shape + (1,))
    a_bar = exp(step * a)
    b_bar = step * b.reshape(b.shape[:-1] + (1, b.shape[-1]))
    return a_bar, b_bar


def run_recurrence(x: np.ndarray, a_bar: np.ndarray, b_bar: np.ndarray,
                   c: np.ndarray, d: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Plain numpy forward of the recurrence.

    Args:
        x: (B, L, C) inputs
        a_bar, b_bar: (B, L, C, N) discrete coefficients
        c: (B, L, N) output projections
        d: (C,) skip weights

    Returns:
        y (B, L, C) and the hidden states h (B, L, C, N)
    """
    batch, length, channels = x.shape
    h = np.zeros(a_bar.shape)
    state = np.zeros((batch, channels, a_bar.shape[-1]))
    for t in range(length):
        state = a_bar[:, t] * state + b_bar[:, t] * x[:, t, :, None]
        h[:, t] = state
    y = np.einsum("blcn,bln->blc", h, c) + x * d
    return y, h


def discrete_scan(x: ArrayLike, a_bar: ArrayLike, b_bar: ArrayLike,
                  c: ArrayLike, d: ArrayLike) -> Tensor:
    """The recurrence as a differentiable node; accepts (L, ...) or (B, L, ...) inputs."""
    x, a_bar, b_bar, c, d = (as_tensor(v) for v in (x, a_bar, b_bar, c, d))
    unbatched = x.ndim == 2
    if unbatched:
        x, a_bar, b_bar, c = (v.reshape((1,) + v.shape) for v in (x, a_bar, b_bar, c))
    if x.shape[1] == 0:
        raise ContractError("cannot scan an empty sequence")
    if a_bar.shape != b_bar.shape or a_bar.shape[:3] != x.shape or c.shape != x.shape[:2] + a_bar.shape[-1:]:
        raise ContractError(
            f"inconsistent scan shapes: x {x.shape}, a_bar {a_bar.shape}, "
            f"b_bar {b_bar.shape}, c {c.shape}"
        )

    xs, ab, bb, cs, ds = x.data, a_bar.data, b_bar.data, c.data, d.data
    y, h = run_recurrence(xs, ab, bb, cs, ds)

    def backward(gy):
        gc = np.einsum("blc,blcn->bln", gy, h)
        gd = (gy * xs).sum(axis=(0, 1))
        gx = gy * ds
        direct = gy[..., None] * cs[:, :, None, :]
        ga = np.zeros_like(ab)
        gb = np.zeros_like(bb)
        carry = np.zeros(ab.shape[:1] + ab.shape[2:])
        for t in reversed(range(xs.shape[1])):
            carry = carry + direct[:, t]
            if t > 0:
                ga[:, t] = carry * h[:, t - 1]
            gb[:, t] = carry * xs[:, t, :, None]
            gx[:, t] += (carry * bb[:, t]).sum(axis=-1)
            carry = carry * ab[:, t]
        return gx, ga, gb, gc, gd

    out = custom(y, (x, a_bar, b_bar, c, d), backward)
    return out.reshape(out.shape[1:]) if unbatched else out


def selective_scan(seq: ArrayLike, params: SSMParams) -> Tensor:
    """Run the selective scan over (..., L, C) sequences; output has the input shape."""
    x = as_tensor(seq)
    if x.ndim < 2 or x.shape[-2] == 0:
        raise ContractError(f"selective_scan needs a nonempty (..., L, C) sequence, got {x.shape}")
    if x.shape[-1] != params.channels:
        raise ContractError(f"sequence has {x.shape[-1]} channels, parameters expect {params.channels}")
    lead = x.shape[:-2]
    length, channels = x.shape[-2:]
    xb = x.reshape((-1, length, channels))
    delta = clip(softplus(xb @ params.w_delta + params.b_delta), DELTA_MIN)
    b_t = xb @ params.w_b + params.b_b
    c_t = xb @ params.w_c + params.b_c
    a_bar, b_bar = params.discretize(delta, b_t)
    y = discrete_scan(xb, a_bar, b_bar, c_t, params.d)
    return y.reshape(lead + (length, channels))


# ------------------------------------------------------------------ CMIM
@dataclass
class CMIMConfig:
    scan_kind: ScanKind = ScanKind.HILBERT
    hilbert_direction: int = 0
    state_dim: int = 4
    levels: Tuple[int, ...] = (3,)
    sequence_mode: str = "interleave"

    def __post_init__(self):
        self.scan_kind = ScanKind.parse(self.scan_kind)
        if self.sequence_mode not in SEQUENCE_MODES:
            raise InputError(f"sequence_mode must be one of {SEQUENCE_MODES}, got '{self.sequence_mode}'")
        self.levels = tuple(sorted(set(self.levels)))
        if not self.levels:
            raise InputError("CMIM needs at least one pyramid level")
        if any(level not in PYRAMID_LEVELS for level in self.levels):
            raise InputError(f"levels must be a subset of {PYRAMID_LEVELS}, got {self.levels}")
        if not 0 <= self.hilbert_direction <= 7:
            raise InputError(f"hilbert_direction must be in 0..7, got {self.hilbert_direction}")
        if self.state_dim < 1:
            raise InputError(f"state_dim must be >= 1, got {self.state_dim}")

    def scans(self, rows: int, cols: int) -> Tuple[List[ScanPermutation], List[ScanPermutation]]:
        """Horizontal and vertical scan passes for a rows×cols map."""
        horizontal = scan_permutation(self.scan_kind, rows, cols, self.hilbert_direction)
        vertical = vertical_permutation(self.scan_kind, rows, cols, self.hilbert_direction)
        return horizontal.passes(), vertical.passes()


@dataclass
class CMIMParams:
    horizontal: SSMParams
    vertical: SSMParams
    level: Optional[int] = field(default=None)

    @classmethod
    def create(cls, channels: int, state_dim: int, rng: np.random.Generator,
               level: Optional[int] = None) -> "CMIMParams":
        return cls(SSMParams.create(channels, state_dim, rng),
                   SSMParams.create(channels, state_dim, rng), level)

    def parameters(self) -> Dict[str, Tensor]:
        named = {f"horizontal.{k}": v for k, v in self.horizontal.parameters().items()}
        named.update({f"vertical.{k}": v for k, v in self.vertical.parameters().items()})
        return named


def _grid(fm) -> Tuple[Tensor, Optional[int]]:
    if isinstance(fm, FeatureMap):
        return as_tensor(fm.data), fm.level
    return as_tensor(fm), None


def _scan_interleaved(seq_o: Tensor, seq_s: Tensor, cells: ScanPermutation,
                      ssm: SSMParams) -> Tuple[Tensor, Tensor]:
    lifted = pairwise(cells)
    z = apply_permutation(interleave_iir(seq_o, seq_s), lifted)
    return deinterleave(apply_permutation(selective_scan(z, ssm), lifted, inverse=True))


def _scan_concatenated(seq_o: Tensor, seq_s: Tensor, cells: ScanPermutation,
                       ssm: SSMParams) -> Tuple[Tensor, Tensor]:
    # both halves follow the same cell order, the SAR half after the whole optical half
    n = seq_o.shape[-2]
    z = concat_traditional(apply_permutation(seq_o, cells), apply_permutation(seq_s, cells))
    scanned = selective_scan(z, ssm)
    first, second = scanned.take(np.arange(n), axis=-2), scanned.take(np.arange(n, 2 * n), axis=-2)
    return apply_permutation(first, cells, inverse=True), apply_permutation(second, cells, inverse=True)


def cmim_forward(
    F_O: Union[FeatureMap, ArrayLike],
    F_S: Union[FeatureMap, ArrayLike],
    cfg: CMIMConfig,
    params: CMIMParams,
    horizontal: Optional[Sequence[ScanPermutation]] = None,
    vertical: Optional[Sequence[ScanPermutation]] = None,
):
    """Cross-modal interaction over one pyramid level.

    Both maps are flattened, interleaved and scanned jointly so every state
    update sees the other modality's patch at the same location. With
    ``sequence_mode="concat"`` the scan instead runs over all modality-A tokens
    followed by all modality-B tokens. The scan passes along the horizontal
    and vertical orders are summed per modality.

    Args:
        F_O: (..., H, W, C) modality-A features
        F_S: (..., H, W, C) modality-B features
        cfg: Scan family and state size
        params: Parameter sets for the two directions
        horizontal, vertical: Explicit cell orders overriding ``cfg``

    Returns:
        (F'_O, F'_S) with the input shapes; FeatureMaps in, FeatureMaps out
    """
    xo, level = _grid(F_O)
    xs, _ = _grid(F_S)
    if xo.shape != xs.shape:
        raise ContractError(f"modalities must share a shape, got {xo.shape} and {xs.shape}")
    if xo.ndim < 3:
        raise ContractError(f"expected (..., H, W, C) feature maps, got {xo.shape}")
    rows, cols = xo.shape[-3:-1]
    if horizontal is None or vertical is None:
        default_h, default_v = cfg.scans(rows, cols)
        horizontal = default_h if horizontal is None else horizontal
        vertical = default_v if vertical is None else vertical

    seq_o, seq_s = flatten_row_major(xo), flatten_row_major(xs)
    scan = _scan_interleaved if cfg.sequence_mode == "interleave" else _scan_concatenated
    total_o = total_s = None
    for passes, ssm in ((horizontal, params.horizontal), (vertical, params.vertical)):
        for cells in passes:
            out_o, out_s = scan(seq_o, seq_s, cells, ssm)
            total_o = out_o if total_o is None else total_o + out_o
            total_s = out_s if total_s is None else total_s + out_s

    enhanced_o, enhanced_s = total_o.reshape(xo.shape), total_s.reshape(xs.shape)
    if level is not None:
        return FeatureMap(enhanced_o, level), FeatureMap(enhanced_s, level)
    return enhanced_o, enhanced_s
