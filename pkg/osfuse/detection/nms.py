"""Greedy rotated non-maximum suppression."""

from __future__ import annotations

import logging
from collections import defaultdict
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..core.errors import ContractError
from .boxes import OrientedBox, rotated_iou
from .evaluation import Detection

logger = logging.getLogger(__name__)


def rotated_nms(boxes: Sequence[OrientedBox], scores: Sequence[float], iou_thresh: float) -> np.ndarray:
    """Indices kept by greedy suppression, in descending score (ties by index).

    A box is dropped when its IoU with an already kept box exceeds ``iou_thresh``.
    """
    if len(boxes) != len(scores):
        raise ContractError(f"{len(boxes)} boxes but {len(scores)} scores")
    if not 0.0 <= iou_thresh <= 1.0:
        raise ContractError(f"iou_thresh must be in [0, 1], got {iou_thresh}")
    order = sorted(range(len(boxes)), key=lambda i: (-float(scores[i]), i))
    kept: List[int] = []
    for i in order:
        if all(rotated_iou(boxes[i], boxes[k]) <= iou_thresh for k in kept):
            kept.append(i)
    return np.array(kept, dtype=np.intp)


def postprocess_detections(dets: Sequence[Detection], iou_thresh: float) -> List[Detection]:
    """Run NMS per (image, category); survivors keep their input order."""
    groups: Dict[Tuple[str, int], List[int]] = defaultdict(list)
    degenerate = 0
    for i, det in enumerate(dets):
        if det.box.area <= 0:
            degenerate += 1
            continue
        groups[(det.image_id, det.category)].append(i)
    if degenerate:
        logger.warning(f"Skipped {degenerate} zero-area detection(s) before NMS")

    survivors = set()
    for members in groups.values():
        kept = rotated_nms([dets[i].box for i in members], [dets[i].score for i in members], iou_thresh)
        survivors.update(members[k] for k in kept)
    logger.debug(f"NMS at {iou_thresh}: kept {len(survivors)} of {len(dets)} detections")
    return [det for i, det in enumerate(dets) if i in survivors]
