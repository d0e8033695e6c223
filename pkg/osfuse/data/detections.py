"""Import and export of detection result files."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Sequence

from ..core.errors import ContractError, InputError
from ..detection.boxes import OrientedBox
from ..detection.evaluation import Detection

logger = logging.getLogger(__name__)


class DetectionImporter:
    """Read ``image_id category score cx cy w h theta`` records, one per line.

    Blank lines and lines starting with ``#`` are skipped.
    """

    FIELDS = ("image_id", "category", "score", "cx", "cy", "w", "h", "theta")

    @classmethod
    def parse_line(cls, line_no: int, line: str) -> Detection:
        parts = line.split()
        if len(parts) != len(cls.FIELDS):
            raise InputError(f"line {line_no}: expected {len(cls.FIELDS)} fields, got {len(parts)}")
        try:
            category = int(parts[1])
            score, cx, cy, w, h, theta = (float(v) for v in parts[2:])
        except ValueError as e:
            raise InputError(f"line {line_no}: {e}") from e
        try:
            box = OrientedBox(cx, cy, w, h, theta)
            return Detection(image_id=parts[0], category=category, box=box, score=score)
        except (InputError, ContractError) as e:
            raise InputError(f"line {line_no}: {e}") from e

    @classmethod
    def parse(cls, text: str) -> List[Detection]:
        detections = []
        for line_no, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            detections.append(cls.parse_line(line_no, stripped))
        return detections

    @classmethod
    def import_file(cls, filepath: Path) -> List[Detection]:
        """Parse a detection file.

        Raises:
            FileNotFoundError: If the file does not exist
            InputError: On the first malformed record
        """
        filepath = Path(filepath)
        if not filepath.exists():
            raise FileNotFoundError(f"File not found: {filepath}")
        try:
            detections = cls.parse(filepath.read_text(encoding="utf-8"))
        except InputError as e:
            e.args = (f"{filepath}: {e}",)
            raise
        logger.info(f"Imported {len(detections)} detections from {filepath}")
        return detections


def format_detections(detections: Sequence[Detection]) -> str:
    lines = []
    for det in detections:
        b = det.box
        lines.append(
            f"{det.image_id} {det.category} {det.score:.6f} "
            f"{b.cx:.6f} {b.cy:.6f} {b.w:.6f} {b.h:.6f} {b.theta:.6f}"
        )
    return "\n".join(lines) + ("\n" if lines else "")
