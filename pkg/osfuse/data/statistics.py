"""Dataset statistics over label files."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from ..core.errors import InputError
from ..detection.evaluation import CATEGORIES
from .labels import LabeledInstance

ANGLE_BINS = 18
ASPECT_EDGES = (1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, math.inf)
SIZE_EDGES = (0.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, math.inf)  # sqrt of pixel area


@dataclass
class DatasetStats:
    """Summary of a labeled dataset."""
    n_images: int
    n_instances: int
    instances_per_image: float
    counts: Dict[str, int]
    percentages: Dict[str, float]
    angle_edges: List[float]
    angle_counts: List[int]
    aspect_edges: List[float]
    aspect_counts: List[int]
    size_edges: List[float]
    size_counts: List[int]
    mean_pixel_area: Dict[str, Optional[float]]

    @classmethod
    def from_labels(cls, labels: Mapping[str, Sequence[LabeledInstance]] | Sequence[Sequence[LabeledInstance]],
                    image_size_px: int) -> "DatasetStats":
        """Compute statistics for per-image instance lists.

        Args:
            labels: Instance lists, keyed by image id or as a plain sequence
            image_size_px: Side length of the (square) images in pixels
        """
        per_image = list(labels.values()) if isinstance(labels, Mapping) else list(labels)
        instances = [inst for image in per_image for inst in image]
        if not instances:
            raise InputError("dataset statistics need at least one labeled instance")
        if image_size_px <= 0:
            raise InputError(f"image size must be positive, got {image_size_px}")

        categories = np.array([inst.category for inst in instances])
        widths = np.array([inst.box.w for inst in instances])
        heights = np.array([inst.box.h for inst in instances])
        thetas = np.array([inst.box.theta for inst in instances])
        areas = widths * heights * float(image_size_px) ** 2
        n = len(instances)

        counts = {name: int((categories == c).sum()) for c, name in enumerate(CATEGORIES)}
        percentages = {name: 100.0 * count / n for name, count in counts.items()}
        mean_area = {
            name: (float(areas[categories == c].mean()) if counts[name] else None)
            for c, name in enumerate(CATEGORIES)
        }

        angle_width = (math.pi / 2) / ANGLE_BINS
        angle_idx = np.minimum((thetas / angle_width).astype(int), ANGLE_BINS - 1)
        angle_counts = np.bincount(angle_idx, minlength=ANGLE_BINS)

        longer, shorter = np.maximum(widths, heights), np.minimum(widths, heights)
        # a point box (w = h = 0) counts as square; a segment (one zero side) as unbounded
        with np.errstate(divide="ignore", invalid="ignore"):
            aspect = np.where(longer > 0, longer / shorter, 1.0)
        aspect_counts = _histogram(aspect, ASPECT_EDGES)
        size_counts = _histogram(np.sqrt(areas), SIZE_EDGES)

        return cls(
            n_images=len(per_image),
            n_instances=n,
            instances_per_image=n / len(per_image),
            counts=counts,
            percentages=percentages,
            angle_edges=[i * angle_width for i in range(ANGLE_BINS + 1)],
            angle_counts=[int(v) for v in angle_counts],
            aspect_edges=list(ASPECT_EDGES),
            aspect_counts=aspect_counts,
            size_edges=list(SIZE_EDGES),
            size_counts=size_counts,
            mean_pixel_area=mean_area,
        )

    def to_dict(self) -> dict:
        def finite(values):
            return [v if math.isfinite(v) else None for v in values]

        return {
            "n_images": self.n_images,
            "n_instances": self.n_instances,
            "instances_per_image": self.instances_per_image,
            "counts": dict(self.counts),
            "percentages": dict(self.percentages),
            "angle_edges": list(self.angle_edges),
            "angle_counts": list(self.angle_counts),
            "aspect_edges": finite(self.aspect_edges),
            "aspect_counts": list(self.aspect_counts),
            "size_edges": finite(self.size_edges),
            "size_counts": list(self.size_counts),
            "mean_pixel_area": dict(self.mean_pixel_area),
        }

    def format_table(self) -> str:
        lines = [f"images: {self.n_images}   instances: {self.n_instances}   "
                 f"ins/img: {self.instances_per_image:.2f}", ""]
        lines.append(f"{'category':<14}{'count':>8}{'percent':>10}{'mean px area':>14}")
        for name in CATEGORIES:
            area = self.mean_pixel_area[name]
            shown = "-" if area is None else f"{area:.1f}"
            lines.append(f"{name:<14}{self.counts[name]:>8}{self.percentages[name]:>9.2f}%{shown:>14}")
        lines.append("")
        lines.append("angle (deg)   count")
        for i, count in enumerate(self.angle_counts):
            lo, hi = math.degrees(self.angle_edges[i]), math.degrees(self.angle_edges[i + 1])
            lines.append(f"{lo:5.1f}-{hi:5.1f}  {count:>6}")
        return "\n".join(lines)


def _histogram(values: np.ndarray, edges: Sequence[float]) -> List[int]:
    counts = [0] * (len(edges) - 1)
    for v in values:
        for i in range(len(edges) - 1):
            if edges[i] <= v < edges[i + 1] or (i == len(edges) - 2 and v >= edges[i]):
                counts[i] += 1
                break
    return counts


def dataset_stats(labels, image_size_px: int) -> DatasetStats:
    return DatasetStats.from_labels(labels, image_size_px)
