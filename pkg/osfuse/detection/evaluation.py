"""COCO-style evaluation of oriented detections.

Detections are matched greedily in descending score order, one ground truth
per detection at most, and precision/recall curves are summarized with
101-point interpolated average precision per category.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Protocol, Sequence, Tuple

import numpy as np

from ..core.errors import InputError
from .boxes import OrientedBox, iou_matrix

logger = logging.getLogger(__name__)

CATEGORIES = ("bridge", "harbor", "oil_tank", "playground", "airport", "wind_turbine")
IOU_THRESHOLDS: Tuple[float, ...] = tuple(float(t) for t in np.round(np.linspace(0.5, 0.95, 10), 2))
RECALL_POINTS = np.linspace(0.0, 1.0, 101)


def check_category(category: int) -> int:
    if not 0 <= int(category) < len(CATEGORIES) or int(category) != category:
        raise InputError(f"unknown category id {category} (expected 0-{len(CATEGORIES) - 1})")
    return int(category)


class GroundTruth(Protocol):
    category: int
    box: OrientedBox


@dataclass(frozen=True)
class Detection:
    image_id: str
    category: int
    box: OrientedBox
    score: float

    def __post_init__(self):
        check_category(self.category)
        if not 0.0 <= self.score <= 1.0:
            raise InputError(f"detection score must be in [0, 1], got {self.score}")


@dataclass
class MatchResult:
    """Outcome of matching one image's detections of one IoU threshold."""
    detections: List[Detection]  # descending score
    flags: np.ndarray            # True = true positive, aligned with ``detections``
    n_gt: int
    unmatched_gt: int

    @property
    def tp(self) -> int:
        return int(self.flags.sum())

    @property
    def fp(self) -> int:
        return int(len(self.flags) - self.flags.sum())


def _by_score(dets: Sequence[Detection]) -> List[Detection]:
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    return [dets[i] for i in order]


def _greedy_flags(ious: np.ndarray, det_cats: Sequence[int], gt_cats: Sequence[int],
                  iou_thresh: float) -> Tuple[np.ndarray, int]:
    flags = np.zeros(len(det_cats), dtype=bool)
    taken = np.zeros(len(gt_cats), dtype=bool)
    for d, category in enumerate(det_cats):
        best, best_iou = -1, -1.0
        for g, gt_category in enumerate(gt_cats):
            if taken[g] or gt_category != category:
                continue
            if ious[d, g] > best_iou:
                best, best_iou = g, ious[d, g]
        if best >= 0 and best_iou >= iou_thresh:
            flags[d] = True
            taken[best] = True
    return flags, int((~taken).sum())


def match_detections(dets: Sequence[Detection], gts: Sequence[GroundTruth],
                     iou_thresh: float) -> MatchResult:
    """Match one image's detections to its ground truth, per category.

    A detection is a true positive when its best still-unmatched ground truth of
    the same category reaches ``iou_thresh``; equal IoUs go to the lower index.
    """
    ranked = _by_score(dets)
    ious = iou_matrix([d.box for d in ranked], [g.box for g in gts])
    flags, unmatched = _greedy_flags(ious, [d.category for d in ranked],
                                     [g.category for g in gts], iou_thresh)
    return MatchResult(detections=ranked, flags=flags, n_gt=len(gts), unmatched_gt=unmatched)


def average_precision(flags: Sequence[bool], n_gt: int) -> Optional[float]:
    """101-point interpolated AP of score-ranked TP/FP flags; None without ground truth."""
    if n_gt < 0:
        raise InputError(f"n_gt must be >= 0, got {n_gt}")
    if n_gt == 0:
        return None
    hits = np.asarray(flags, dtype=bool)
    if hits.size == 0:
        return 0.0
    tp = np.cumsum(hits)
    fp = np.cumsum(~hits)
    recall = tp / n_gt
    precision = tp / (tp + fp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_POINTS, side="left")
    sampled = np.zeros(RECALL_POINTS.size)
    reachable = idx < recall.size
    sampled[reachable] = envelope[idx[reachable]]
    return float(sampled.mean())


@dataclass
class EvalReport:
    """AP values in percent; classes without ground truth carry None."""
    ap50_per_class: Dict[str, Optional[float]]
    ap50: float
    ap75: float
    map: float
    ap_per_threshold: Dict[str, float] = field(default_factory=dict)
    n_images: int = 0
    n_detections: int = 0
    n_ground_truth: int = 0

    def to_dict(self) -> dict:
        return {
            "AP50": self.ap50,
            "AP75": self.ap75,
            "mAP": self.map,
            "AP50_per_class": dict(self.ap50_per_class),
            "AP_per_threshold": dict(self.ap_per_threshold),
            "n_images": self.n_images,
            "n_detections": self.n_detections,
            "n_ground_truth": self.n_ground_truth,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def format_table(self) -> str:
        lines = [f"{'category':<14}{'AP50':>8}"]
        for name, value in self.ap50_per_class.items():
            shown = "-" if value is None else f"{value:.2f}"
            lines.append(f"{name:<14}{shown:>8}")
        lines.append("-" * 22)
        lines.append(f"{'ALL AP50':<14}{self.ap50:>8.2f}")
        lines.append(f"{'ALL AP75':<14}{self.ap75:>8.2f}")
        lines.append(f"{'ALL mAP':<14}{self.map:>8.2f}")
        return "\n".join(lines)


def _class_mean(values: Sequence[Optional[float]]) -> float:
    defined = [v for v in values if v is not None]
    return float(np.mean(defined)) if defined else 0.0


def evaluate(all_dets: Sequence[Detection],
             all_gts: Mapping[str, Sequence[GroundTruth]],
             thresholds: Sequence[float] = IOU_THRESHOLDS) -> EvalReport:
    """AP50 per class, class-mean AP50/AP75 and mAP over ``thresholds`` (percent).

    Detections on images without ground truth count as false positives.
    """
    for gts in all_gts.values():
        for gt in gts:
            check_category(gt.category)
    per_image: Dict[str, List[Detection]] = defaultdict(list)
    for det in all_dets:
        check_category(det.category)
        per_image[det.image_id].append(det)
    orphans = sorted(set(per_image) - set(all_gts))
    if orphans:
        logger.warning(f"{len(orphans)} image(s) have detections but no ground truth, e.g. '{orphans[0]}'")

    image_ids = list(all_gts) + orphans
    n_gt = np.zeros(len(CATEGORIES), dtype=int)
    prepared = []
    for image_id in image_ids:
        gts = list(all_gts.get(image_id, ()))
        for gt in gts:
            n_gt[gt.category] += 1
        ranked = _by_score(per_image.get(image_id, []))
        ious = iou_matrix([d.box for d in ranked], [g.box for g in gts])
        prepared.append((ranked, gts, ious))

    ap_table: Dict[float, List[Optional[float]]] = {}
    for thresh in thresholds:
        scores: List[List[float]] = [[] for _ in CATEGORIES]
        hits: List[List[bool]] = [[] for _ in CATEGORIES]
        for ranked, gts, ious in prepared:
            flags, _ = _greedy_flags(ious, [d.category for d in ranked],
                                     [g.category for g in gts], thresh)
            for det, flag in zip(ranked, flags):
                scores[det.category].append(det.score)
                hits[det.category].append(bool(flag))
        row = []
        for c in range(len(CATEGORIES)):
            order = np.argsort(-np.asarray(scores[c], dtype=np.float64), kind="stable")
            ranked_hits = np.asarray(hits[c], dtype=bool)[order]
            ap = average_precision(ranked_hits, int(n_gt[c]))
            row.append(None if ap is None else 100.0 * ap)
        ap_table[thresh] = row

    def at(thresh: float) -> List[Optional[float]]:
        for key, row in ap_table.items():
            if abs(key - thresh) < 1e-9:
                return row
        return [None] * len(CATEGORIES)

    per_threshold = {f"{t:.2f}": _class_mean(row) for t, row in ap_table.items()}
    report = EvalReport(
        ap50_per_class=dict(zip(CATEGORIES, at(0.5))),
        ap50=_class_mean(at(0.5)),
        ap75=_class_mean(at(0.75)),
        map=float(np.mean(list(per_threshold.values()))) if per_threshold else 0.0,
        ap_per_threshold=per_threshold,
        n_images=len(image_ids),
        n_detections=len(all_dets),
        n_ground_truth=int(n_gt.sum()),
    )
    logger.info(f"Evaluated {report.n_detections} detections on {report.n_images} images: "
                f"AP50 {report.ap50:.2f}, mAP {report.map:.2f}")
    return report
