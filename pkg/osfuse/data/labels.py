"""Quadrilateral label files.

One instance per line::

    category x1 y1 x2 y2 x3 y3 x4 y4

with an integer category 0-5 and vertex coordinates normalized to [0, 1].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence

from ..core.errors import DegeneracyError, LabelParseError, LabelValidationError
from ..detection.boxes import OrientedBox, Quad, normalize_angle, obb_to_quad, quad_to_obb
from ..detection.evaluation import CATEGORIES

logger = logging.getLogger(__name__)

FIELD_COUNT = 9
LABEL_SUFFIX = ".txt"


@dataclass(frozen=True)
class LabeledInstance:
    category: int
    quad: Quad
    box: OrientedBox

    @classmethod
    def from_quad(cls, category: int, quad: Quad) -> "LabeledInstance":
        return cls(category=category, quad=quad, box=normalize_angle(quad_to_obb(quad)))

    @classmethod
    def from_box(cls, category: int, box: OrientedBox) -> "LabeledInstance":
        box = normalize_angle(box)
        return cls(category=category, quad=obb_to_quad(box), box=box)


def _parse_line(line_no: int, line: str) -> LabeledInstance:
    fields = line.split()
    if len(fields) != FIELD_COUNT:
        raise LabelParseError(line_no, f"expected {FIELD_COUNT} fields, got {len(fields)}")
    try:
        category = int(fields[0])
    except ValueError as e:
        raise LabelParseError(line_no, f"category must be an integer, got '{fields[0]}'") from e
    if not 0 <= category < len(CATEGORIES):
        raise LabelValidationError(line_no, category, f"category outside 0-{len(CATEGORIES) - 1}")
    try:
        coords = [float(v) for v in fields[1:]]
    except ValueError as e:
        raise LabelParseError(line_no, f"non-numeric coordinate ({e})") from e
    for value in coords:
        if not 0.0 <= value <= 1.0:
            raise LabelValidationError(line_no, value)
    try:
        return LabeledInstance.from_quad(category, Quad(coords))
    except DegeneracyError as e:
        raise LabelParseError(line_no, f"degenerate quad ({e})") from e


def parse_label_file(text: str) -> List[LabeledInstance]:
    """Instances in file order; blank lines are skipped."""
    instances = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            instances.append(_parse_line(line_no, line))
    return instances


def format_label_file(instances: Sequence[LabeledInstance]) -> str:
    """Serialize with six decimals per coordinate."""
    lines = []
    for inst in instances:
        coords = " ".join(f"{v:.6f}" for v in inst.quad.flat())
        lines.append(f"{inst.category} {coords}")
    return "\n".join(lines) + ("\n" if lines else "")


def read_label_file(path: Path) -> List[LabeledInstance]:
    path = Path(path)
    try:
        instances = parse_label_file(path.read_text(encoding="utf-8"))
    except (LabelParseError, LabelValidationError) as e:
        # keep the line attribute, prefix the file name
        e.args = (f"{path}: {e}",)
        raise
    if not instances:
        logger.warning(f"Label file {path} is empty")
    return instances


def write_label_file(path: Path, instances: Sequence[LabeledInstance]) -> None:
    Path(path).write_text(format_label_file(instances), encoding="utf-8")


def read_label_dir(directory: Path) -> Dict[str, List[LabeledInstance]]:
    """All ``*.txt`` label files in a directory keyed by file stem, sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"Label directory not found: {directory}")
    labels = {path.stem: read_label_file(path) for path in sorted(directory.glob(f"*{LABEL_SUFFIX}"))}
    logger.info(f"Read {sum(len(v) for v in labels.values())} instances from {len(labels)} label files")
    return labels
