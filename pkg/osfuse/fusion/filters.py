"""Handcrafted feature operators and the filter-augment residual.

Five descriptors (wavelet scattering, Canny, Haar, HOG and ratio-of-means
gradients) turn an image into a single-channel response in [0, 1]. The
augmentation adds that response back onto the image scaled by a learnable
``alpha``::

    F = I + alpha * broadcast(filter(I))
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy import ndimage

from ..core.errors import DimensionError, InputError
from ..core.tensor import Tensor, parameter

logger = logging.getLogger(__name__)

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

# Guard for min-max normalisation of flat responses
_FLAT_SPAN = 1e-12


class FilterKind(str, Enum):
    WST = "wst"
    CANNY = "canny"
    HAAR = "haar"
    HOG = "hog"
    GRAD = "grad"

    @classmethod
    def parse(cls, value: Union[str, "FilterKind"]) -> "FilterKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError as e:
            choices = ", ".join(k.value for k in cls)
            raise InputError(f"unknown filter kind '{value}' (choose from {choices})") from e


class HaarKernel(str, Enum):
    HORIZONTAL_EDGE = "horizontal_edge"  # upper box minus lower box
    VERTICAL_EDGE = "vertical_edge"  # left box minus right box
    CENTER_SURROUND = "center_surround"


@dataclass
class FilterAugmentParams:
    """Learnable residual weight of one modality."""
    alpha: Tensor

    @classmethod
    def create(cls, alpha_init: float = 0.0) -> "FilterAugmentParams":
        return cls(alpha=parameter(alpha_init))


# ---------------------------------------------------------------- image utils
def as_image(values) -> np.ndarray:
    """Validate and return an H×W×C float image (2-D input gains a channel axis)."""
    img = np.asarray(values, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise DimensionError(f"image must be H×W×1 or H×W×3, got shape {img.shape}")
    if img.shape[0] == 0 or img.shape[1] == 0:
        raise DimensionError(f"image has zero size: {img.shape}")
    return img


def to_gray(img: np.ndarray) -> np.ndarray:
    """Luma for 3-channel images, the single channel otherwise."""
    img = as_image(img)
    if img.shape[2] == 3:
        return img @ LUMA_WEIGHTS
    return img[:, :, 0]


def normalize_minmax(response: np.ndarray) -> np.ndarray:
    """Per-channel min-max scaling to [0, 1]; flat channels become zeros."""
    out = np.zeros_like(response, dtype=np.float64)
    channels = response[..., None] if response.ndim == 2 else response
    target = out[..., None] if out.ndim == 2 else out
    for c in range(channels.shape[-1]):
        channel = channels[..., c]
        lo, hi = channel.min(), channel.max()
        span = hi - lo
        if span > _FLAT_SPAN:
            target[..., c] = (channel - lo) / span
    return out


# ---------------------------------------------------------------------- Canny
_NMS_SECTORS: Tuple[Tuple[float, float, Tuple[int, int]], ...] = (
    (22.5, 67.5, (1, 1)),
    (67.5, 112.5, (1, 0)),
    (112.5, 157.5, (1, -1)),
)


def canny_edges(gray: np.ndarray, low: float = 0.1, high: float = 0.2) -> np.ndarray:
    """Binary Canny edge map (sigma 1 Gaussian, Sobel, NMS, 8-connected hysteresis).

    Args:
        gray: 2-D image
        low: Weak threshold as a fraction of the maximum gradient magnitude
        high: Strong threshold as a fraction of the maximum gradient magnitude
    """
    smooth = ndimage.gaussian_filter(gray, sigma=1.0, truncate=2.0, mode="nearest")
    gx = ndimage.sobel(smooth, axis=1, mode="nearest")
    gy = ndimage.sobel(smooth, axis=0, mode="nearest")
    magnitude = np.hypot(gx, gy)
    peak = magnitude.max()
    if peak <= _FLAT_SPAN:
        return np.zeros_like(gray)

    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    offsets = np.zeros(gray.shape + (2,), dtype=int)
    offsets[..., 1] = 1  # horizontal gradient: compare left/right
    for lo, hi, (dr, dc) in _NMS_SECTORS:
        sector = (angle >= lo) & (angle < hi)
        offsets[sector] = (dr, dc)

    height, width = gray.shape
    padded = np.pad(magnitude, 1)
    rows, cols = np.indices(gray.shape)
    ahead = padded[rows + 1 + offsets[..., 0], cols + 1 + offsets[..., 1]]
    behind = padded[rows + 1 - offsets[..., 0], cols + 1 - offsets[..., 1]]
    # Strict on one side so a symmetric plateau yields a single-pixel ridge
    thin = np.where((magnitude > behind) & (magnitude >= ahead), magnitude, 0.0)

    strong = thin >= high * peak
    weak = (thin >= low * peak) & (thin > 0)
    labels, count = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if count == 0:
        return np.zeros_like(gray)
    keep = np.unique(labels[strong])
    keep = keep[keep > 0]
    return np.isin(labels, keep).astype(np.float64)


# ------------------------------------------------------------------------ HOG
def _central_gradients(gray: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    gx = np.zeros_like(gray)
    gy = np.zeros_like(gray)
    gx[:, 1:-1] = gray[:, 2:] - gray[:, :-2]
    gy[1:-1, :] = gray[2:, :] - gray[:-2, :]
    return gx, gy


def hog_cell_histograms(gray: np.ndarray, cell: int = 8, bins: int = 9) -> np.ndarray:
    """Magnitude-weighted unsigned orientation histograms per cell.

    Returns:
        Array of shape (ceil(H/cell), ceil(W/cell), bins); bin b covers
        orientations [b*180/bins, (b+1)*180/bins) degrees.
    """
    gx, gy = _central_gradients(gray)
    magnitude = np.hypot(gx, gy)
    orientation = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    bin_index = np.minimum((orientation // (180.0 / bins)).astype(int), bins - 1)

    height, width = gray.shape
    cells_y = -(-height // cell)
    cells_x = -(-width // cell)
    rows, cols = np.indices(gray.shape)
    flat = ((rows // cell) * cells_x + cols // cell) * bins + bin_index
    hist = np.bincount(flat.ravel(), weights=magnitude.ravel(), minlength=cells_y * cells_x * bins)
    return hist.reshape(cells_y, cells_x, bins)


def _render_hog(hist: np.ndarray, shape: Tuple[int, int], cell: int, eps: float = 1e-5) -> np.ndarray:
    cells_y, cells_x, bins = hist.shape
    block_y, block_x = min(2, cells_y), min(2, cells_x)
    strength = np.zeros((cells_y, cells_x))
    counts = np.zeros((cells_y, cells_x))
    for i in range(cells_y - block_y + 1):
        for j in range(cells_x - block_x + 1):
            block = hist[i:i + block_y, j:j + block_x].ravel()
            v = block / np.sqrt(np.sum(block**2) + eps**2)
            v = np.minimum(v, 0.2)  # L2-hys clipping
            v = v / np.sqrt(np.sum(v**2) + eps**2)
            strength[i:i + block_y, j:j + block_x] += v.reshape(block_y, block_x, bins).sum(axis=-1)
            counts[i:i + block_y, j:j + block_x] += 1
    strength /= counts
    dense = np.repeat(np.repeat(strength, cell, axis=0), cell, axis=1)
    return dense[: shape[0], : shape[1]]


# ----------------------------------------------------------------------- Haar
def _box_means(ii: np.ndarray, pad: int, shape: Tuple[int, int],
               r0: int, r1: int, c0: int, c1: int) -> np.ndarray:
    rows = np.arange(shape[0])[:, None] + pad
    cols = np.arange(shape[1])[None, :] + pad
    total = (ii[rows + r1, cols + c1] - ii[rows + r0, cols + c1]
             - ii[rows + r1, cols + c0] + ii[rows + r0, cols + c0])
    return total / float((r1 - r0) * (c1 - c0))


def haar_response(gray: np.ndarray, kernel: HaarKernel, scale: int = 4) -> np.ndarray:
    """Signed Haar-like response at every pixel, evaluated on an integral image.

    Edge kernels compare the mean of the ``scale`` rows (columns) before a pixel
    with the ``scale`` rows (columns) starting at it, over a 2*scale span.
    """
    kernel = HaarKernel(kernel)
    if scale < 1:
        raise InputError(f"Haar scale must be >= 1, got {scale}")
    half = max(1, scale // 2)
    pad = max(scale, 2 * half)
    padded = np.pad(gray, pad, mode="edge")
    ii = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1))
    ii[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)

    s = scale
    if kernel is HaarKernel.HORIZONTAL_EDGE:
        return (_box_means(ii, pad, gray.shape, -s, 0, -s, s)
                - _box_means(ii, pad, gray.shape, 0, s, -s, s))
    if kernel is HaarKernel.VERTICAL_EDGE:
        return (_box_means(ii, pad, gray.shape, -s, s, -s, 0)
                - _box_means(ii, pad, gray.shape, -s, s, 0, s))
    inner = _box_means(ii, pad, gray.shape, -half, half, -half, half)
    outer = _box_means(ii, pad, gray.shape, -2 * half, 2 * half, -2 * half, 2 * half)
    inner_area, outer_area = (2 * half) ** 2, (4 * half) ** 2
    ring = (outer * outer_area - inner * inner_area) / (outer_area - inner_area)
    return inner - ring


# ----------------------------------------------------------------------- Grad
_GRAD_HALF_WINDOW = 4
_GRAD_DECAY = 2.0
_GRAD_EPS = 1e-6


def _side_kernels() -> Tuple[np.ndarray, np.ndarray]:
    weights = np.exp(-np.arange(_GRAD_HALF_WINDOW) / _GRAD_DECAY)
    weights /= weights.sum()
    size = 2 * _GRAD_HALF_WINDOW + 1
    before, after = np.zeros(size), np.zeros(size)
    for k in range(1, _GRAD_HALF_WINDOW + 1):
        before[_GRAD_HALF_WINDOW - k] = weights[k - 1]
        after[_GRAD_HALF_WINDOW + k] = weights[k - 1]
    return before, after


def grad_ratio_response(gray: np.ndarray) -> np.ndarray:
    """Log ratio of exponentially weighted side means, combined over both axes.

    The image is divided by its global mean first, which makes the response
    independent of any positive multiplicative scale.
    """
    level = gray.mean()
    if level <= 0:
        return np.zeros_like(gray)
    unit = gray / level
    before, after = _side_kernels()
    logs = []
    for axis in (1, 0):
        m_before = ndimage.correlate1d(unit, before, axis=axis, mode="reflect")
        m_after = ndimage.correlate1d(unit, after, axis=axis, mode="reflect")
        logs.append(np.log((m_before + _GRAD_EPS) / (m_after + _GRAD_EPS)))
    return np.hypot(logs[0], logs[1])


# ------------------------------------------------------------------------ WST
_WST_WIDTHS = (2, 4)
_WST_POOL = 4


def haar_wavelets(width: int) -> List[np.ndarray]:
    """Zero-mean Haar-like kernels at 0, 45, 90 and 135 degrees, each with unit l1 norm."""
    half = width // 2
    horizontal = np.zeros((1, width))
    horizontal[0, :half] = 1.0 / width
    horizontal[0, half:] = -1.0 / width
    rows, cols = np.indices((width, width))
    diagonals = []
    for plus, minus in ((rows + cols < width - 1, rows + cols > width - 1), (rows < cols, rows > cols)):
        k = np.zeros((width, width))
        k[plus] = 0.5 / plus.sum()
        k[minus] = -0.5 / minus.sum()
        diagonals.append(k)
    return [horizontal, diagonals[0], horizontal.T.copy(), diagonals[1]]


def _interp_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Bilinear resampling matrix with half-pixel centres and edge clamping."""
    matrix = np.zeros((n_out, n_in))
    src = (np.arange(n_out) + 0.5) * n_in / n_out - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    np.add.at(matrix, (np.arange(n_out), lo), 1.0 - frac)
    np.add.at(matrix, (np.arange(n_out), hi), frac)
    return matrix


def _pool_upsample(channel: np.ndarray, factor: int = _WST_POOL) -> np.ndarray:
    height, width = channel.shape
    ph, pw = -(-height // factor) * factor, -(-width // factor) * factor
    padded = np.pad(channel, ((0, ph - height), (0, pw - width)), mode="wrap")
    pooled = padded.reshape(ph // factor, factor, pw // factor, factor).mean(axis=(1, 3))
    up = _interp_matrix(ph // factor, ph) @ pooled @ _interp_matrix(pw // factor, pw).T
    return up[:height, :width]


def scattering_energy(gray: np.ndarray) -> np.ndarray:
    """Depth-2 scattering energy map before normalisation.

    Averages the pooled order-0 signal, the 8 first-order moduli and the
    second-order moduli along increasing scale. Every path is 1-Lipschitz, so
    the map is non-expansive in l2.
    """
    bank = [(j, k) for j, width in enumerate(_WST_WIDTHS) for k in haar_wavelets(width)]
    paths = [gray]
    first = []
    for j, kernel in bank:
        u = np.abs(ndimage.correlate(gray, kernel, mode="wrap"))
        first.append((j, u))
        paths.append(u)
    for j1, u in first:
        for j2, kernel in bank:
            if j2 > j1:
                paths.append(np.abs(ndimage.correlate(u, kernel, mode="wrap")))
    return np.mean([_pool_upsample(p) for p in paths], axis=0)


# ------------------------------------------------------------------- dispatch
def _raw_response(kind: FilterKind, gray: np.ndarray) -> np.ndarray:
    if kind is FilterKind.CANNY:
        return canny_edges(gray)
    if kind is FilterKind.HOG:
        cell = 8
        return _render_hog(hog_cell_histograms(gray, cell=cell), gray.shape, cell)
    if kind is FilterKind.HAAR:
        responses = [np.abs(haar_response(gray, k, scale=4)) for k in HaarKernel]
        return np.mean(responses, axis=0)
    if kind is FilterKind.GRAD:
        return grad_ratio_response(gray)
    return scattering_energy(gray)


def apply_filter(kind: Union[FilterKind, str], img) -> np.ndarray:
    """Single-channel descriptor response in [0, 1] with the input's height and width."""
    kind = FilterKind.parse(kind)
    gray = to_gray(img)
    return normalize_minmax(_raw_response(kind, gray))[:, :, None]


def fam_residual(images, responses, alpha: Union[Tensor, float]) -> Union[Tensor, np.ndarray]:
    """``images + alpha * responses`` with responses broadcast over channels."""
    images = np.asarray(images, dtype=np.float64)
    responses = np.broadcast_to(np.asarray(responses, dtype=np.float64), images.shape)
    if isinstance(alpha, Tensor):
        return Tensor(images) + alpha * responses
    return images + float(alpha) * responses


def filter_augment(img, kind: Union[FilterKind, str],
                   params: Union[FilterAugmentParams, float],
                   response: Optional[np.ndarray] = None) -> Union[Tensor, np.ndarray]:
    """Residual augmentation of one image.

    Args:
        img: H×W×C image
        kind: Descriptor to apply
        params: Learnable parameters (returns a Tensor) or a plain alpha
        response: Precomputed ``apply_filter(kind, img)`` to reuse
    """
    base = as_image(img)
    if response is None:
        response = apply_filter(kind, base)
    alpha = params.alpha if isinstance(params, FilterAugmentParams) else params
    return fam_residual(base, response, alpha)
