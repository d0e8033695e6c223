import math

import numpy as np
import pytest

from osfuse.core.errors import InputError, LabelParseError, LabelValidationError
from osfuse.data.detections import DetectionImporter, format_detections
from osfuse.data.labels import (
    LabeledInstance,
    format_label_file,
    parse_label_file,
    read_label_dir,
    read_label_file,
    write_label_file,
)
from osfuse.detection.boxes import OrientedBox, rotated_iou
from osfuse.detection.evaluation import Detection


def test_parse_single_instance():
    [inst] = parse_label_file("2 0.10 0.20 0.30 0.20 0.30 0.40 0.10 0.40\n")
    assert inst.category == 2
    box = inst.box
    assert (box.cx, box.cy, box.w, box.h, box.theta) == pytest.approx((0.2, 0.3, 0.2, 0.2, 0.0), abs=1e-12)


def test_empty_file_has_no_instances():
    assert parse_label_file("") == []
    assert parse_label_file("\n  \n") == []


def test_wrong_field_count():
    with pytest.raises(LabelParseError, match="expected 9 fields, got 4") as info:
        parse_label_file("1 0.1 0.2 0.3")
    assert info.value.line == 1


def test_line_numbers_count_blank_lines():
    text = "0 0.1 0.1 0.2 0.1 0.2 0.2 0.1 0.2\n\n1 0.1 0.1 1.2 0.1 0.2 0.2 0.1 0.2\n"
    with pytest.raises(LabelValidationError) as info:
        parse_label_file(text)
    assert info.value.line == 3
    assert info.value.value == 1.2
    assert str(info.value).startswith("line 3:")


def test_bad_category_and_tokens():
    with pytest.raises(LabelValidationError):
        parse_label_file("6 0.1 0.1 0.2 0.1 0.2 0.2 0.1 0.2")
    with pytest.raises(LabelParseError):
        parse_label_file("x 0.1 0.1 0.2 0.1 0.2 0.2 0.1 0.2")
    with pytest.raises(LabelParseError, match="degenerate"):
        parse_label_file("0 0.1 0.1 0.1 0.1 0.2 0.2 0.1 0.2")


def test_label_errors_are_input_errors():
    assert issubclass(LabelParseError, InputError)
    assert issubclass(LabelValidationError, InputError)


def test_format_then_parse_keeps_instances(rng):
    instances = []
    for _ in range(50):
        box = OrientedBox(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.05, 0.3),
                          rng.uniform(0.05, 0.3), rng.uniform(0.0, math.pi))
        instances.append(LabeledInstance.from_box(int(rng.integers(0, 6)), box))
    parsed = parse_label_file(format_label_file(instances))
    assert len(parsed) == len(instances)
    for before, after in zip(instances, parsed):
        assert after.category == before.category
        np.testing.assert_allclose(after.quad.points, before.quad.points, atol=1e-6)
        assert rotated_iou(after.box, before.box) > 1.0 - 1e-4


def test_files_and_directories(tmp_path):
    inst = LabeledInstance.from_box(4, OrientedBox(0.5, 0.5, 0.2, 0.1, 0.3))
    write_label_file(tmp_path / "00001.txt", [inst])
    (tmp_path / "00000.txt").write_text("", encoding="utf-8")
    labels = read_label_dir(tmp_path)
    assert list(labels) == ["00000", "00001"]
    assert labels["00000"] == []
    assert labels["00001"][0].category == 4


def test_file_errors_name_the_file(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1 0.5\n", encoding="utf-8")
    with pytest.raises(LabelParseError, match="bad.txt") as info:
        read_label_file(path)
    assert info.value.line == 1
    with pytest.raises(FileNotFoundError):
        read_label_dir(tmp_path / "missing")


# ----------------------------------------------------------------- detections
def test_detection_records():
    text = "# header\n00000 3 0.9 0.5 0.5 0.2 0.1 0.3\n\n00001 0 0.25 0.1 0.2 0.05 0.05 0\n"
    dets = DetectionImporter.parse(text)
    assert [d.image_id for d in dets] == ["00000", "00001"]
    assert dets[0].category == 3 and dets[0].score == 0.9
    assert DetectionImporter.parse(format_detections(dets)) == dets


@pytest.mark.parametrize(
    "line, message",
    [
        ("00000 3 0.9 0.5", "expected 8 fields"),
        ("00000 3 high 0.5 0.5 0.2 0.1 0.3", "line 1"),
        ("00000 8 0.9 0.5 0.5 0.2 0.1 0.3", "unknown category id 8"),
        ("00000 1 1.5 0.5 0.5 0.2 0.1 0.3", "score"),
        ("00000 1 0.5 0.5 0.5 -0.2 0.1 0.3", "non-negative"),
    ],
)
def test_malformed_detection_records(line, message):
    with pytest.raises(InputError, match=message):
        DetectionImporter.parse(line)


def test_detection_file(tmp_path):
    path = tmp_path / "dets.txt"
    path.write_text(format_detections([Detection("a", 1, OrientedBox(0.5, 0.5, 0.1, 0.1), 0.5)]))
    assert len(DetectionImporter.import_file(path)) == 1
    with pytest.raises(FileNotFoundError):
        DetectionImporter.import_file(tmp_path / "none.txt")
