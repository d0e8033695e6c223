"""Synthetic paired-modality dataset with complementary corruptions.

Every image holds one rotated rectangular target of category 0 or 1 on a
shared smooth background:

- modality A (optical-like) shows the category as stripe texture, vertical
  for category 0 and horizontal for category 1, at equal mean brightness;
  an opaque bright blob (cloud) covers part of the image and, for a
  configurable share of images, the whole target;
- modality B (SAR-like) is never occluded but has no texture. The category
  shows only as target brightness, and the whole image is multiplied by
  unit-mean gamma speckle.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import ndimage

from ..core.rng import substream
from ..core.settings import RunConfig
from ..detection.boxes import OrientedBox
from .labels import LabeledInstance, format_label_file
from .pnm import write_image

logger = logging.getLogger(__name__)

N_CATEGORIES = 2
STRIPE_PERIOD = 4
TEXTURE_MEAN = 0.6
TEXTURE_AMPLITUDE = 0.25
SAR_BRIGHTNESS = (0.85, 0.60)
BLOB_VALUE = 0.95
MAX_BLOB_FRACTION = 0.6
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class SyntheticPair:
    index: int
    optical: np.ndarray  # (S, S) in [0, 1]
    sar: np.ndarray      # (S, S) in [0, 1]
    category: int
    labels: List[LabeledInstance]
    target_occluded: bool
    occluded_target_fraction: float
    blob_fraction: float

    @property
    def image_id(self) -> str:
        return f"{self.index:05d}"


@dataclass
class SyntheticDataset:
    pairs: List[SyntheticPair] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)

    def optical(self) -> np.ndarray:
        return np.stack([p.optical for p in self.pairs])

    def sar(self) -> np.ndarray:
        return np.stack([p.sar for p in self.pairs])

    def categories(self) -> np.ndarray:
        return np.array([p.category for p in self.pairs], dtype=np.intp)

    def occluded_share(self) -> float:
        return float(np.mean([p.occluded_target_fraction for p in self.pairs])) if self.pairs else 0.0


def _target_mask(size: int, box: OrientedBox) -> np.ndarray:
    coords = (np.arange(size) + 0.5) / size
    x, y = np.meshgrid(coords, coords)
    dx, dy = x - box.cx, y - box.cy
    c, s = math.cos(box.theta), math.sin(box.theta)
    u = dx * c + dy * s
    v = -dx * s + dy * c
    return (np.abs(u) <= box.w / 2) & (np.abs(v) <= box.h / 2)


def _disc_mask(size: int, center: Tuple[float, float], radius: float) -> np.ndarray:
    """Disc on the torus, in pixel units."""
    idx = np.arange(size) + 0.5
    dx = np.abs(idx[None, :] - center[0])
    dy = np.abs(idx[:, None] - center[1])
    dx = np.minimum(dx, size - dx)
    dy = np.minimum(dy, size - dy)
    return dx * dx + dy * dy <= radius * radius


def _torus_distance(a: Tuple[float, float], b: Tuple[float, float], size: int) -> float:
    dx = abs(a[0] - b[0])
    dy = abs(a[1] - b[1])
    return math.hypot(min(dx, size - dx), min(dy, size - dy))


def _background(rng: np.random.Generator, size: int) -> np.ndarray:
    field_ = ndimage.gaussian_filter(rng.normal(size=(size, size)), sigma=3.0, mode="wrap")
    field_ /= max(np.abs(field_).max(), 1e-12)
    return 0.35 + 0.1 * field_


def _stripes(size: int, category: int) -> np.ndarray:
    phase = (np.arange(size) % STRIPE_PERIOD) < STRIPE_PERIOD // 2
    wave = np.where(phase, 1.0, -1.0)
    grid = np.tile(wave, (size, 1)) if category == 0 else np.tile(wave[:, None], (1, size))
    return TEXTURE_MEAN + TEXTURE_AMPLITUDE * grid


def _place_blob(rng: np.random.Generator, size: int, target_center: Tuple[float, float],
                target_radius: float, occlude: bool) -> Tuple[Tuple[float, float], float]:
    max_radius = math.sqrt(MAX_BLOB_FRACTION * size * size / math.pi)
    if occlude:
        radius = min(max_radius, target_radius + rng.uniform(0.5, 0.08 * size))
        return target_center, radius
    radius = rng.uniform(0.1, 0.25) * size
    for attempt in range(64):
        center = (rng.uniform(0, size), rng.uniform(0, size))
        if _torus_distance(center, target_center, size) > radius + target_radius + 1.0:
            return center, radius
        if attempt % 8 == 7:
            radius *= 0.8
            logger.debug(f"Blob placement retry {attempt + 1}, shrinking radius to {radius:.1f}px")
    return center, 0.0


def _occlusion_draw(seed: int, index: int) -> float:
    # Kronecker sequence keeps the occluded share within O(1/n) of the configured rate
    offset = substream(seed, "occlusion").uniform()
    return (offset + index * _GOLDEN) % 1.0


def make_pair(cfg: RunConfig, index: int) -> SyntheticPair:
    """Generate image ``index`` of the dataset defined by ``cfg``."""
    size = cfg.image_size
    rng = substream(cfg.seed, "data", index)
    category = index % N_CATEGORIES

    w = rng.uniform(0.25, 0.40)
    h = rng.uniform(0.15, 0.25)
    box = OrientedBox(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), w, h, rng.uniform(0.0, math.pi / 2))
    target = _target_mask(size, box)
    background = _background(rng, size)

    optical = np.where(target, _stripes(size, category), background)
    occlude = _occlusion_draw(cfg.seed, index) < cfg.occlusion_rate
    center_px = (box.cx * size, box.cy * size)
    target_radius = 0.5 * math.hypot(box.w, box.h) * size
    blob_center, blob_radius = _place_blob(rng, size, center_px, target_radius, occlude)
    blob = _disc_mask(size, blob_center, blob_radius) if blob_radius > 0 else np.zeros_like(target)
    optical = np.where(blob, BLOB_VALUE, optical)

    sar = np.where(target, SAR_BRIGHTNESS[category], background)
    if cfg.speckle:
        sar = sar * rng.gamma(cfg.speckle_shape, 1.0 / cfg.speckle_shape, size=sar.shape)

    covered = float((blob & target).sum() / max(target.sum(), 1))
    return SyntheticPair(
        index=index,
        optical=np.clip(optical, 0.0, 1.0),
        sar=np.clip(sar, 0.0, 1.0),
        category=category,
        labels=[LabeledInstance.from_box(category, box)],
        target_occluded=covered >= 0.999,
        occluded_target_fraction=covered,
        blob_fraction=float(blob.mean()),
    )


def generate_synthetic_pairs(cfg: RunConfig, count: Optional[int] = None, start: int = 0) -> SyntheticDataset:
    """Images ``start .. start + count`` of the seeded dataset (default: train + test)."""
    cfg.validate()
    count = cfg.n_train + cfg.n_test if count is None else count
    dataset = SyntheticDataset([make_pair(cfg, start + i) for i in range(count)])
    logger.info(f"Generated {count} synthetic pairs (seed {cfg.seed}, "
                f"occluded share {dataset.occluded_share():.3f})")
    return dataset


def split_dataset(cfg: RunConfig) -> Tuple[SyntheticDataset, SyntheticDataset]:
    """Training images first, held-out images after them."""
    return (generate_synthetic_pairs(cfg, cfg.n_train, 0),
            generate_synthetic_pairs(cfg, cfg.n_test, cfg.n_train))


def write_dataset(dataset: SyntheticDataset, out_dir: Path, cfg: RunConfig) -> Path:
    """Write optical/, sar/, labels/ and manifest.json; returns the manifest path."""
    out_dir = Path(out_dir)
    for sub in ("optical", "sar", "labels"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    entries: List[Dict] = []
    for pair in dataset.pairs:
        write_image(out_dir / "optical" / f"{pair.image_id}.pgm", pair.optical)
        write_image(out_dir / "sar" / f"{pair.image_id}.pgm", pair.sar)
        (out_dir / "labels" / f"{pair.image_id}.txt").write_text(
            format_label_file(pair.labels), encoding="utf-8"
        )
        entries.append({
            "id": pair.image_id,
            "category": pair.category,
            "target_occluded": pair.target_occluded,
            "occluded_target_fraction": round(pair.occluded_target_fraction, 6),
            "blob_fraction": round(pair.blob_fraction, 6),
        })
    manifest = out_dir / "manifest.json"
    manifest.write_text(
        json.dumps({"config": cfg.to_dict(), "images": entries}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    logger.info(f"Wrote {len(entries)} pairs to {out_dir}")
    return manifest
