"""Detection loss terms on pre-matched prediction/target pairs.

``L_total = L_reg + L_dfl + L_cls`` where the regression term is the ProbIoU
Hellinger distance, the distribution term is the distribution focal loss over
discretized side lengths and the classification term is binary cross-entropy.
Everything is built from :mod:`osfuse.core.tensor` ops so gradients flow to
every prediction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np

from ..core.errors import ContractError, DegeneracyError
from ..core.tensor import (
    ArrayLike,
    Tensor,
    as_tensor,
    clip,
    cos,
    exp,
    log,
    log_softmax_lastdim,
    sin,
    softplus,
    sqrt,
)
from .boxes import DET_FLOOR

DFL_BINS = 16
_PROB_EPS = 1e-12


def bce(p: ArrayLike, y: ArrayLike) -> Tensor:
    """Mean binary cross-entropy on probabilities."""
    p, y = as_tensor(p), as_tensor(y)
    if p.shape != y.shape:
        raise ContractError(f"probabilities {p.shape} and targets {y.shape} differ in shape")
    p = clip(p, _PROB_EPS, 1.0 - _PROB_EPS)
    return -(y * log(p) + (1.0 - y) * log(1.0 - p)).mean()


def bce_with_logits(z: ArrayLike, y: ArrayLike) -> Tensor:
    """Mean binary cross-entropy on logits: softplus(z) - y*z."""
    z, y = as_tensor(z), as_tensor(y)
    if z.shape != y.shape:
        raise ContractError(f"logits {z.shape} and targets {y.shape} differ in shape")
    if z.size == 0:
        raise ContractError("cannot average an empty set of logits")
    return (softplus(z) - y * z).mean()


def dfl(logits: ArrayLike, target: ArrayLike) -> Tensor:
    """Distribution focal loss.

    Args:
        logits: (..., n_bins) unnormalized bin scores
        target: (...) continuous targets in bin units, clipped into [0, n_bins - 1)
    """
    logits = as_tensor(logits)
    y = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    if logits.shape[:-1] != y.shape:
        raise ContractError(f"DFL logits {logits.shape} do not match targets {y.shape}")
    bins = logits.shape[-1]
    if bins < 2:
        raise ContractError(f"DFL needs at least two bins, got {bins}")
    y = np.clip(y, 0.0, bins - 1 - 1e-6)
    left = np.floor(y).astype(np.intp)
    w_left = (left + 1) - y
    w_right = y - left

    flat = log_softmax_lastdim(logits).reshape((-1, bins))
    rows = np.arange(flat.shape[0])
    lp_left = flat[rows, left.reshape(-1)]
    lp_right = flat[rows, left.reshape(-1) + 1]
    return -(lp_left * w_left.reshape(-1) + lp_right * w_right.reshape(-1)).mean()


def _box_columns(boxes: Tensor):
    return tuple(boxes[:, i] for i in range(5))


def probiou_hellinger(pred: ArrayLike, target: ArrayLike) -> Tensor:
    """Per-pair Hellinger distance between the Gaussians of (M, 5) boxes."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape or pred.ndim != 2 or pred.shape[1] != 5:
        raise ContractError(f"expected matching (M, 5) boxes, got {pred.shape} and {target.shape}")

    def covariance(w, h, theta):
        a = w * w * (1.0 / 12.0)
        b = h * h * (1.0 / 12.0)
        c, s = cos(theta), sin(theta)
        return a * c * c + b * s * s, a * s * s + b * c * c, (a - b) * c * s, a * b

    px, py, pw, ph, pt = _box_columns(pred)
    tx, ty, tw, th, tt = _box_columns(target)
    p11, p22, p12, p_det = covariance(pw, ph, pt)
    t11, t22, t12, t_det = covariance(tw, th, tt)
    s11, s22, s12 = (p11 + t11) * 0.5, (p22 + t22) * 0.5, (p12 + t12) * 0.5
    det = s11 * s22 - s12 * s12
    if np.any(det.data <= DET_FLOOR) or np.any(p_det.data <= DET_FLOOR) or np.any(t_det.data <= DET_FLOOR):
        raise DegeneracyError("singular box covariance in ProbIoU")

    dx, dy = px - tx, py - ty
    term_mean = (s22 * dx * dx - s12 * dx * dy * 2.0 + s11 * dy * dy) / det * 0.125
    term_cov = log(det / sqrt(p_det * t_det)) * 0.5
    distance = clip(term_mean + term_cov, 0.0, None)
    return sqrt(clip(1.0 - exp(-distance), 0.0, None))


@dataclass
class LossTargets:
    """Ground truth aligned one-to-one with predictions."""
    boxes: np.ndarray    # (M, 5) cx, cy, w, h, theta
    classes: np.ndarray  # (M, n_classes) binary targets

    def __post_init__(self):
        self.boxes = np.asarray(self.boxes, dtype=np.float64).reshape(-1, 5)
        self.classes = np.asarray(self.classes, dtype=np.float64)
        if self.classes.ndim == 1:
            self.classes = self.classes[:, None]
        if len(self.boxes) != len(self.classes):
            raise ContractError(f"{len(self.boxes)} target boxes but {len(self.classes)} class rows")

    def __len__(self) -> int:
        return len(self.boxes)

    @classmethod
    def from_categories(cls, boxes: ArrayLike, categories, n_classes: int) -> "LossTargets":
        one_hot = np.zeros((len(categories), n_classes))
        one_hot[np.arange(len(categories)), np.asarray(categories, dtype=np.intp)] = 1.0
        return cls(boxes=np.asarray(boxes), classes=one_hot)


@dataclass
class LossTerms:
    reg: Tensor
    dfl: Tensor
    cls: Tensor
    total: Tensor

    def values(self) -> Dict[str, float]:
        return {"L_reg": self.reg.item(), "L_dfl": self.dfl.item(),
                "L_cls": self.cls.item(), "L_total": self.total.item()}


def side_targets(boxes: np.ndarray, bins: int = DFL_BINS) -> np.ndarray:
    """Normalized w and h scaled into bin units, shape (M, 2)."""
    return np.clip(np.asarray(boxes)[:, 2:4] * bins, 0.0, bins - 1 - 1e-6)


def loss_terms(pred_boxes: ArrayLike, pred_dist: ArrayLike, pred_logits: ArrayLike,
               targets: LossTargets) -> LossTerms:
    """Combined loss over M matched pairs.

    Args:
        pred_boxes: (M, 5) predicted boxes
        pred_dist: (M, 2, n_bins) side-length distributions for w and h
        pred_logits: (M, n_classes) class logits
        targets: matched ground truth
    """
    pred_boxes, pred_dist, pred_logits = (as_tensor(v) for v in (pred_boxes, pred_dist, pred_logits))
    m = len(targets)
    if m == 0:
        raise ContractError("loss_terms needs at least one matched pair")
    if pred_boxes.shape[0] != m or pred_dist.shape[0] != m or pred_logits.shape[0] != m:
        raise ContractError(
            f"{m} targets but predictions have {pred_boxes.shape[0]} boxes, "
            f"{pred_dist.shape[0]} distributions, {pred_logits.shape[0]} logit rows"
        )
    if pred_dist.ndim != 3 or pred_dist.shape[1] != 2:
        raise ContractError(f"pred_dist must be (M, 2, n_bins), got {pred_dist.shape}")

    reg = probiou_hellinger(pred_boxes, targets.boxes).mean()
    dist = dfl(pred_dist, side_targets(targets.boxes, pred_dist.shape[-1]))
    cls = bce_with_logits(pred_logits, targets.classes)
    return LossTerms(reg=reg, dfl=dist, cls=cls, total=reg + dist + cls)
