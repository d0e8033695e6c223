import json

import numpy as np
import pytest

from osfuse.core.errors import InputError
from osfuse.data.labels import LabeledInstance
from osfuse.detection.boxes import OrientedBox, rotated_iou
from osfuse.detection.evaluation import (
    CATEGORIES,
    IOU_THRESHOLDS,
    Detection,
    average_precision,
    evaluate,
    match_detections,
)


def gt(category, cx, cy, w=0.1, h=0.1, theta=0.0):
    return LabeledInstance.from_box(category, OrientedBox(cx, cy, w, h, theta))


def det(image_id, category, box, score):
    return Detection(image_id=image_id, category=category, box=box, score=score)


def test_thresholds():
    assert IOU_THRESHOLDS[0] == 0.5 and IOU_THRESHOLDS[-1] == 0.95
    assert len(IOU_THRESHOLDS) == 10


def test_average_precision_examples():
    assert average_precision([True], 1) == 1.0
    assert average_precision([False], 1) == 0.0
    assert average_precision([], 3) == 0.0
    assert average_precision([True, False, True], 2) == pytest.approx((51 + 50 * 2 / 3) / 101, rel=1e-12)
    assert average_precision([True, False, True], 2) == pytest.approx(0.8333, abs=2e-3)
    assert average_precision([False], 0) is None


def test_unknown_category_is_rejected():
    with pytest.raises(InputError, match="unknown category id 9"):
        det("a", 9, OrientedBox(0.5, 0.5, 0.1, 0.1), 0.5)
    bad_gt = LabeledInstance(category=7, quad=gt(0, 0.5, 0.5).quad, box=gt(0, 0.5, 0.5).box)
    with pytest.raises(InputError, match="unknown category id 7"):
        evaluate([], {"a": [bad_gt]})


def test_greedy_matching_takes_best_box_first():
    gts = [gt(0, 0.2, 0.2), gt(0, 0.7, 0.7)]
    dets = [
        det("a", 0, OrientedBox(0.2, 0.2, 0.1, 0.1), 0.9),
        det("a", 0, OrientedBox(0.21, 0.2, 0.1, 0.1), 0.8),
        det("a", 1, OrientedBox(0.7, 0.7, 0.1, 0.1), 0.7),
    ]
    result = match_detections(dets, gts, 0.5)
    assert result.flags.tolist() == [True, False, False]
    assert (result.tp, result.fp, result.unmatched_gt) == (1, 2, 1)


def test_no_detections_leaves_all_ground_truth_unmatched():
    result = match_detections([], [gt(0, 0.2, 0.2), gt(1, 0.5, 0.5), gt(2, 0.8, 0.8)], 0.5)
    assert (result.tp, result.fp, result.unmatched_gt) == (0, 0, 3)


def test_perfect_detections_score_one_hundred():
    gts = {"a": [gt(0, 0.3, 0.3), gt(3, 0.7, 0.7, 0.2, 0.1, 0.4)], "b": [gt(3, 0.5, 0.5)]}
    dets = [det(image, inst.category, inst.box, 0.9) for image, items in gts.items() for inst in items]
    report = evaluate(dets, gts)
    assert report.ap50 == pytest.approx(100.0)
    assert report.ap75 == pytest.approx(100.0)
    assert report.map == pytest.approx(100.0)
    assert report.ap50_per_class["bridge"] == pytest.approx(100.0)
    assert report.ap50_per_class["harbor"] is None
    assert report.n_ground_truth == 3


def test_no_detections_score_zero():
    report = evaluate([], {"a": [gt(1, 0.5, 0.5)]})
    assert (report.ap50, report.ap75, report.map) == (0.0, 0.0, 0.0)


def test_orphan_detections_are_false_positives(caplog):
    gts = {"a": [gt(0, 0.5, 0.5)]}
    hit = det("a", 0, gts["a"][0].box, 0.5)
    orphan = det("zzz", 0, OrientedBox(0.5, 0.5, 0.1, 0.1), 0.9)
    report = evaluate([hit, orphan], gts)
    assert report.ap50 == pytest.approx(50.0)
    assert "no ground truth" in caplog.text
    assert report.n_images == 2


def test_low_scoring_miss_never_raises_ap():
    gts = {"a": [gt(0, 0.3, 0.3), gt(0, 0.7, 0.7)]}
    dets = [det("a", 0, gts["a"][0].box, 0.9)]
    base = evaluate(dets, gts).ap50
    worse = evaluate(dets + [det("a", 0, OrientedBox(0.1, 0.9, 0.05, 0.05), 0.1)], gts).ap50
    assert worse <= base


def test_report_serialization_is_deterministic():
    gts = {"a": [gt(0, 0.3, 0.3)], "b": [gt(2, 0.6, 0.4)]}
    dets = [det("a", 0, OrientedBox(0.31, 0.3, 0.1, 0.1), 0.8), det("b", 2, OrientedBox(0.6, 0.4, 0.1, 0.12), 0.4)]
    first, second = evaluate(dets, gts).to_json(), evaluate(dets, gts).to_json()
    assert first == second
    payload = json.loads(first)
    assert set(payload["AP50_per_class"]) == set(CATEGORIES)
    assert "ALL mAP" in evaluate(dets, gts).format_table()


# ------------------------------------------------------- randomized fixtures
def random_fixture(rng, n_images=5):
    """Well separated ground truth on a grid; detections jitter around one box each."""
    gts, dets = {}, []
    centers = [(0.2, 0.2), (0.5, 0.2), (0.8, 0.2), (0.2, 0.6), (0.8, 0.6)]
    for i in range(n_images):
        image_id = f"{i:05d}"
        chosen = rng.choice(len(centers), size=3, replace=False)
        items = [gt(int(rng.integers(0, 3)), *centers[c], 0.12, 0.12, rng.uniform(0, 1.5)) for c in chosen]
        gts[image_id] = items
        for inst in items:
            for _ in range(int(rng.integers(0, 3))):
                b = inst.box
                box = OrientedBox(b.cx + rng.normal(0, 0.015), b.cy + rng.normal(0, 0.015),
                                  b.w * rng.uniform(0.8, 1.2), b.h * rng.uniform(0.8, 1.2), b.theta)
                dets.append(det(image_id, inst.category, box, float(rng.uniform())))
    return dets, gts


def reference_ap50(dets, gts, category):
    """Independent AP50 for one category: greedy matching then 101-point interpolation."""
    ranked = sorted([d for d in dets if d.category == category], key=lambda d: -d.score)
    taken = set()
    flags = []
    for d in ranked:
        candidates = [(rotated_iou(d.box, g.box), -j, j) for j, g in enumerate(gts.get(d.image_id, []))
                      if g.category == category and (d.image_id, j) not in taken]
        best = max(candidates, default=None)
        if best is not None and best[0] >= 0.5:
            taken.add((d.image_id, best[2]))
            flags.append(True)
        else:
            flags.append(False)
    n_gt = sum(g.category == category for items in gts.values() for g in items)
    if n_gt == 0:
        return None
    tp = fp = 0
    points = []
    for f in flags:
        tp, fp = tp + f, fp + (not f)
        points.append((tp / n_gt, tp / (tp + fp)))
    total = 0.0
    for r in np.linspace(0.0, 1.0, 101):
        total += max([p for rec, p in points if rec >= r], default=0.0)
    return 100.0 * total / 101


def test_ap50_matches_reference_evaluator(rng):
    for _ in range(20):
        dets, gts = random_fixture(rng)
        report = evaluate(dets, gts)
        for c, name in enumerate(CATEGORIES):
            expected = reference_ap50(dets, gts, c)
            if expected is None:
                assert report.ap50_per_class[name] is None
            else:
                assert report.ap50_per_class[name] == pytest.approx(expected, abs=1e-9)


def test_stricter_thresholds_never_score_higher(rng):
    for _ in range(100):
        dets, gts = random_fixture(rng)
        report = evaluate(dets, gts)
        assert report.map <= report.ap50 + 1e-9
        assert report.ap75 <= report.ap50 + 1e-9
        assert 0.0 <= report.map <= 100.0
