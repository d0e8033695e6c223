"""Tiny patch-classification models for the fusion experiment.

A trunk turns one modality into a pyramid of feature maps::

    image -> filter augment -> 8x8 patch embedding + ReLU (level 3)
          -> 2x2 average pooling (level 4) -> 2x2 average pooling (level 5)

Single-modality models pool the trunk's maps straight into the head. The fused
model runs the cross-modal scan on every configured level, adds the residual
and fuses the two maps with area attention before pooling. Each of the three
stages can be switched off in the run configuration: the trunk then skips the
filter residual, the maps skip the scan, or the two maps are averaged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..core.errors import ContractError
from ..core.rng import substream
from ..core.settings import RunConfig
from ..core.tensor import Tensor, as_tensor, concat, parameter
from ..fusion.area_attention import AFMParams, AreaConfig, afm_fuse
from ..fusion.filters import FilterAugmentParams, fam_residual
from ..fusion.ssm import CMIMConfig, CMIMParams, cmim_forward

PATCH = 8
N_CLASSES = 2


@dataclass
class ModalityBatch:
    images: np.ndarray     # (B, S, S)
    responses: np.ndarray  # (B, S, S) precomputed filter responses

    def __len__(self) -> int:
        return len(self.images)

    def subset(self, idx: np.ndarray) -> "ModalityBatch":
        return ModalityBatch(self.images[idx], self.responses[idx])


@dataclass
class Batch:
    optical: ModalityBatch
    sar: ModalityBatch
    labels: np.ndarray  # (B,) category ids

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx: np.ndarray) -> "Batch":
        return Batch(self.optical.subset(idx), self.sar.subset(idx), self.labels[idx])

    def one_hot(self) -> np.ndarray:
        targets = np.zeros((len(self.labels), N_CLASSES))
        targets[np.arange(len(self.labels)), self.labels] = 1.0
        return targets


def _avg_pool2(x: Tensor) -> Tensor:
    b, h, w, c = x.shape
    return x.reshape((b, h // 2, 2, w // 2, 2, c)).mean(axis=(2, 4))


def _global_pool(x: Tensor) -> Tensor:
    """(B, H, W, C) -> (B, 2C): max and mean over positions."""
    return concat([x.max(axis=(1, 2)), x.mean(axis=(1, 2))], axis=-1)


@dataclass
class Trunk:
    w_embed: Tensor  # (PATCH*PATCH, E)
    b_embed: Tensor  # (E,)
    fam: Optional[FilterAugmentParams] = None  # learnable alpha
    fixed_alpha: Optional[float] = None        # used when ``fam`` is None; None skips augmentation

    @classmethod
    def create(cls, cfg: RunConfig, rng: np.random.Generator) -> "Trunk":
        fan_in = PATCH * PATCH
        trunk = cls(
            w_embed=parameter(rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_in, cfg.embed_dim))),
            b_embed=parameter(np.zeros(cfg.embed_dim)),
        )
        if cfg.use_fam and cfg.learn_alpha:
            trunk.fam = FilterAugmentParams.create(cfg.alpha_init)
        elif cfg.use_fam:
            trunk.fixed_alpha = cfg.alpha_init
        return trunk

    def parameters(self) -> Dict[str, Tensor]:
        named = {"w_embed": self.w_embed, "b_embed": self.b_embed}
        if self.fam is not None:
            named["alpha"] = self.fam.alpha
        return named

    def augment(self, batch: ModalityBatch) -> Tensor:
        if self.fam is not None:
            return fam_residual(batch.images, batch.responses, self.fam.alpha)
        if self.fixed_alpha is not None:
            return as_tensor(fam_residual(batch.images, batch.responses, self.fixed_alpha))
        return as_tensor(np.asarray(batch.images, dtype=np.float64))

    def pyramid(self, batch: ModalityBatch, levels: Tuple[int, ...]) -> Dict[int, Tensor]:
        b, size, _ = batch.images.shape
        if size % PATCH:
            raise ContractError(f"image size {size} is not a multiple of the {PATCH}px patch")
        g = size // PATCH
        x = self.augment(batch)
        patches = x.reshape((b, g, PATCH, g, PATCH)).transpose((0, 1, 3, 2, 4))
        tokens = patches.reshape((b, g, g, PATCH * PATCH))
        maps = {3: (tokens @ self.w_embed + self.b_embed).relu()}
        for level in (4, 5):
            if level > max(levels):
                break
            maps[level] = _avg_pool2(maps[level - 1])
        return {level: maps[level] for level in levels}


@dataclass
class Head:
    w: Tensor  # (D, N_CLASSES)
    b: Tensor  # (N_CLASSES,)

    @classmethod
    def create(cls, in_features: int) -> "Head":
        # zero start: every untrained model predicts class 0
        return cls(w=parameter(np.zeros((in_features, N_CLASSES))), b=parameter(np.zeros(N_CLASSES)))

    def parameters(self) -> Dict[str, Tensor]:
        return {"w": self.w, "b": self.b}

    def __call__(self, features: Tensor) -> Tensor:
        return features @ self.w + self.b


class SingleModalityModel:
    """Trunk plus head on one modality."""

    def __init__(self, modality: str, cfg: RunConfig, rng: np.random.Generator):
        if modality not in ("optical", "sar"):
            raise ContractError(f"modality must be 'optical' or 'sar', got '{modality}'")
        self.modality = modality
        self.levels = cfg.level_set
        self.trunk = Trunk.create(cfg, rng)
        self.head = Head.create(2 * cfg.embed_dim * len(self.levels))

    def parameters(self) -> Dict[str, Tensor]:
        named = {f"trunk.{k}": v for k, v in self.trunk.parameters().items()}
        named.update({f"head.{k}": v for k, v in self.head.parameters().items()})
        return named

    def forward(self, batch: Batch) -> Tensor:
        maps = self.trunk.pyramid(getattr(batch, self.modality), self.levels)
        return self.head(concat([_global_pool(maps[level]) for level in self.levels], axis=-1))


class FusedModel:
    """Two trunks joined by cross-modal scanning and area-attention fusion."""

    def __init__(self, cfg: RunConfig, rng: np.random.Generator):
        self.levels = cfg.level_set
        self.cmim_cfg = CMIMConfig(cfg.scan_kind, cfg.hilbert_direction, cfg.state_dim, self.levels,
                                   cfg.sequence_mode)
        self.area_cfg = AreaConfig(cfg.area_k, cfg.area_axis, cfg.head_dim)
        self.optical = Trunk.create(cfg, rng)
        self.sar = Trunk.create(cfg, rng)
        # disabled modules hold no parameters
        self.cmim: Dict[int, CMIMParams] = {}
        if cfg.use_cmim:
            self.cmim = {level: CMIMParams.create(cfg.embed_dim, cfg.state_dim, rng, level)
                         for level in self.levels}
        self.afm: Dict[int, AFMParams] = {}
        if cfg.use_afm:
            self.afm = {level: AFMParams.create(cfg.embed_dim, cfg.head_dim, rng) for level in self.levels}
        self.head = Head.create(2 * cfg.embed_dim * len(self.levels))

    def parameters(self) -> Dict[str, Tensor]:
        named: Dict[str, Tensor] = {}
        for prefix, part in (("optical", self.optical), ("sar", self.sar)):
            named.update({f"{prefix}.{k}": v for k, v in part.parameters().items()})
        for level, cmim in self.cmim.items():
            named.update({f"cmim{level}.{k}": v for k, v in cmim.parameters().items()})
        for level, afm in self.afm.items():
            named.update({f"afm{level}.{k}": v for k, v in afm.parameters().items()})
        named.update({f"head.{k}": v for k, v in self.head.parameters().items()})
        return named

    def fuse_level(self, level: int, f_o: Tensor, f_s: Tensor) -> Tensor:
        if level in self.cmim:
            enhanced_o, enhanced_s = cmim_forward(f_o, f_s, self.cmim_cfg, self.cmim[level])
            f_o, f_s = enhanced_o + f_o, enhanced_s + f_s
        if level not in self.afm:
            return (f_o + f_s) * 0.5
        return afm_fuse(f_o, f_s, self.afm[level], self.area_cfg)

    def fused_maps(self, batch: Batch) -> Dict[int, Tensor]:
        optical = self.optical.pyramid(batch.optical, self.levels)
        sar = self.sar.pyramid(batch.sar, self.levels)
        return {level: self.fuse_level(level, optical[level], sar[level]) for level in self.levels}

    def forward(self, batch: Batch) -> Tensor:
        fused = self.fused_maps(batch)
        return self.head(concat([_global_pool(fused[level]) for level in self.levels], axis=-1))


def build_model(kind: str, cfg: RunConfig, stream: int = 0):
    """Model by kind ('optical', 'sar' or 'fused') with seeded initial parameters."""
    rng = substream(cfg.seed, "init", stream)
    if kind == "fused":
        return FusedModel(cfg, rng)
    return SingleModalityModel(kind, cfg, rng)


def _count(params: Dict[str, Tensor]) -> int:
    return int(sum(p.size for p in params.values()))


def parameter_breakdown(model) -> Dict[str, int]:
    """Parameter counts per component; ``total`` sums the rest."""
    if isinstance(model, FusedModel):
        parts = {
            "optical_trunk": _count(model.optical.parameters()),
            "sar_trunk": _count(model.sar.parameters()),
            "cmim": sum(_count(p.parameters()) for p in model.cmim.values()),
            "afm": sum(_count(p.parameters()) for p in model.afm.values()),
            "head": _count(model.head.parameters()),
        }
    else:
        parts = {
            f"{model.modality}_trunk": _count(model.trunk.parameters()),
            "head": _count(model.head.parameters()),
        }
    parts["total"] = sum(parts.values())
    if parts["total"] != _count(model.parameters()):
        raise ContractError("parameter breakdown does not add up to the model's parameters")
    return parts


def predict(model, batch: Batch, chunk: int = 64) -> np.ndarray:
    """Class predictions in chunks; ties go to class 0."""
    out: List[np.ndarray] = []
    for start in range(0, len(batch), chunk):
        logits = model.forward(batch.subset(np.arange(start, min(start + chunk, len(batch)))))
        out.append(np.argmax(logits.data, axis=-1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.intp)


def accuracy(model, batch: Batch, chunk: int = 64) -> float:
    """Held-out accuracy in percent."""
    if len(batch) == 0:
        return 0.0
    return 100.0 * float(np.mean(predict(model, batch, chunk) == batch.labels))
