"""Cross-modal similarity of co-registered image pairs (MSE, SSIM, MI)."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from ..core.errors import ContractError, InputError
from ..fusion.filters import FilterKind, apply_filter, to_gray

logger = logging.getLogger(__name__)

SSIM_WINDOW = 8
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
MI_BINS = 64


@dataclass(frozen=True)
class PairMetrics:
    mse: float
    ssim: float
    mi: float  # bits

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def _gray_pair(a, b) -> Tuple[np.ndarray, np.ndarray]:
    ga, gb = to_gray(a), to_gray(b)
    if ga.shape != gb.shape:
        raise ContractError(f"image pair must share a shape, got {ga.shape} and {gb.shape}")
    return ga, gb


def _local_mean(x: np.ndarray, size: int) -> np.ndarray:
    # valid region only: window of output i spans [i - size//2, i - size//2 + size)
    start = size // 2
    stop_r = x.shape[0] - size + 1 + start
    stop_c = x.shape[1] - size + 1 + start
    return ndimage.uniform_filter(x, size=size, mode="reflect")[start:stop_r, start:stop_c]


def ssim(a, b, window: int = SSIM_WINDOW) -> float:
    """Mean SSIM over all uniform ``window``×``window`` windows on the [0, 1] range."""
    ga, gb = _gray_pair(a, b)
    size = min(window, *ga.shape)
    mu_a, mu_b = _local_mean(ga, size), _local_mean(gb, size)
    var_a = _local_mean(ga * ga, size) - mu_a * mu_a
    var_b = _local_mean(gb * gb, size) - mu_b * mu_b
    cov = _local_mean(ga * gb, size) - mu_a * mu_b
    numerator = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    denominator = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(numerator / denominator))


def mutual_information(a, b, bins: int = MI_BINS) -> float:
    """Histogram estimate in bits; never negative."""
    ga, gb = _gray_pair(a, b)
    joint, _, _ = np.histogram2d(ga.ravel(), gb.ravel(), bins=bins, range=[[0.0, 1.0], [0.0, 1.0]])
    p = joint / joint.sum()
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    nz = p > 0
    mi = float(np.sum(p[nz] * np.log2(p[nz] / (px @ py)[nz])))
    return max(0.0, mi)


def pair_metrics(a, b) -> PairMetrics:
    ga, gb = _gray_pair(a, b)
    return PairMetrics(
        mse=float(np.mean((ga - gb) ** 2)),
        ssim=ssim(ga, gb),
        mi=mutual_information(ga, gb),
    )


def aggregate_pair_metrics(pairs: Iterable[Tuple[np.ndarray, np.ndarray]]) -> Dict[str, float]:
    """Per-pair mean of MSE, SSIM and MI over a dataset."""
    collected = [pair_metrics(a, b) for a, b in pairs]
    if not collected:
        raise InputError("no image pairs to aggregate")
    result = {
        name: float(np.mean([getattr(m, name) for m in collected]))
        for name in ("mse", "ssim", "mi")
    }
    result["count"] = len(collected)
    logger.info(f"Pair metrics over {len(collected)} pairs: MSE {result['mse']:.4f}, "
                f"SSIM {result['ssim']:.4f}, MI {result['mi']:.4f}")
    return result


def feature_space_similarity(optical, sar,
                             kinds: Sequence[Union[FilterKind, str]] = tuple(FilterKind)) -> Dict[str, float]:
    """SSIM between the modalities in pixel space and after each descriptor.

    Returns:
        ``{"raw": ..., "<kind>": ...}``
    """
    ga, gb = _gray_pair(optical, sar)
    result = {"raw": ssim(ga, gb)}
    for kind in kinds:
        kind = FilterKind.parse(kind)
        result[kind.value] = ssim(apply_filter(kind, ga), apply_filter(kind, gb))
    best = max((k for k in result if k != "raw"), key=lambda k: result[k], default=None)
    if best is not None:
        logger.debug(f"Highest cross-modal structural alignment: {best} ({result[best]:.4f})")
    return result
