"""Fusion-versus-single-modality experiment on the synthetic pairs.

Three models train with identical budgets (optical only, SAR only, fused) and
their held-out accuracies are compared. The reported margin is the fused
accuracy minus the best single-modality accuracy, in percentage points.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..core.errors import TrainingDivergedError
from ..core.rng import substream
from ..core.settings import RunConfig
from ..data.synthetic import SyntheticDataset, split_dataset
from ..detection.losses import bce_with_logits
from ..fusion.filters import apply_filter
from .models import Batch, ModalityBatch, accuracy, build_model, parameter_breakdown
from .optim import SGD

logger = logging.getLogger(__name__)

MODEL_KINDS = ("optical", "sar", "fused")
MARGIN_NOTE = ("Accuracy margin on a synthetic two-class task; an analogue of a "
               "dataset-level detection mAP gain, not a reproduction of it.")


def filter_responses(images: np.ndarray, kind: str) -> np.ndarray:
    """(n, S, S) responses of one filter kind."""
    if len(images) == 0:
        return np.zeros_like(images)
    return np.stack([apply_filter(kind, img)[:, :, 0] for img in images])


def prepare_batch(dataset: SyntheticDataset, cfg: RunConfig) -> Batch:
    optical, sar = dataset.optical(), dataset.sar()
    logger.debug(f"Computing {cfg.filter_kind} responses for {len(dataset)} pairs")
    return Batch(
        optical=ModalityBatch(optical, filter_responses(optical, cfg.filter_kind)),
        sar=ModalityBatch(sar, filter_responses(sar, cfg.filter_kind)),
        labels=dataset.categories(),
    )


@dataclass
class ModelResult:
    kind: str
    accuracy: float                                   # held-out, percent
    losses: List[float] = field(default_factory=list)  # mean training loss per epoch
    test_curve: List[float] = field(default_factory=list)  # held-out accuracy per epoch
    parameters: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "accuracy": self.accuracy,
            "losses": list(self.losses),
            "test_curve": list(self.test_curve),
            "parameters": dict(self.parameters),
        }


def train_model(kind: str, cfg: RunConfig, train: Batch, test: Batch, stream: int = 0,
                track_curve: bool = True) -> ModelResult:
    """Train one model kind and measure held-out accuracy.

    Raises:
        TrainingDivergedError: If the loss stops being finite
    """
    model = build_model(kind, cfg, stream)
    params = model.parameters()
    optimizer = SGD(params, lr=cfg.learning_rate, momentum=cfg.momentum, weight_decay=cfg.weight_decay)
    result = ModelResult(kind=kind, accuracy=0.0, parameters=parameter_breakdown(model))

    for epoch in range(cfg.epochs):
        order = substream(cfg.seed, "shuffle", stream, epoch).permutation(len(train))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = train.subset(order[start:start + cfg.batch_size])
            optimizer.zero_grad()
            loss = bce_with_logits(model.forward(batch), batch.one_hot())
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingDivergedError(
                    f"{kind} model diverged at epoch {epoch + 1} (loss {value}; filter={cfg.filter_kind}, "
                    f"scan={cfg.scan_kind}, k={cfg.area_k}, seed={cfg.seed})"
                )
            loss.backward()
            optimizer.step()
            epoch_loss += value * len(batch)
        result.losses.append(epoch_loss / max(len(train), 1))
        if track_curve:
            result.test_curve.append(accuracy(model, test))
        logger.debug(f"{kind} epoch {epoch + 1}/{cfg.epochs}: loss {result.losses[-1]:.4f}")

    result.accuracy = result.test_curve[-1] if result.test_curve else accuracy(model, test)
    logger.info(f"{kind} model: held-out accuracy {result.accuracy:.2f}%")
    return result


@dataclass
class ExperimentReport:
    config: Dict
    results: Dict[str, ModelResult]
    note: str = MARGIN_NOTE

    @property
    def best_single(self) -> Optional[float]:
        singles = [self.results[k].accuracy for k in ("optical", "sar") if k in self.results]
        return max(singles) if singles else None

    @property
    def margin(self) -> Optional[float]:
        if "fused" not in self.results or self.best_single is None:
            return None
        return self.results["fused"].accuracy - self.best_single

    def to_dict(self) -> dict:
        return {
            "config": dict(self.config),
            "results": {k: r.to_dict() for k, r in self.results.items()},
            "best_single": self.best_single,
            "margin": self.margin,
            "note": self.note,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def format_table(self) -> str:
        lines = [f"{'model':<10}{'accuracy':>10}{'params':>10}"]
        for kind, result in self.results.items():
            lines.append(f"{kind:<10}{result.accuracy:>9.2f}%{result.parameters.get('total', 0):>10}")
        if self.margin is not None:
            lines.append(f"fused - best single: {self.margin:+.2f} points")
        if "fused" in self.results:
            parts = self.results["fused"].parameters
            lines.append("fused parameters: " + ", ".join(
                f"{name} {count}" for name, count in parts.items() if name != "total"))
        lines.append(self.note)
        return "\n".join(lines)


def toy_fusion_experiment(cfg: RunConfig, kinds: Sequence[str] = MODEL_KINDS,
                          track_curve: bool = True) -> ExperimentReport:
    """Generate the data, train every kind and compare held-out accuracies."""
    cfg.validate()
    train_set, test_set = split_dataset(cfg)
    train, test = prepare_batch(train_set, cfg), prepare_batch(test_set, cfg)
    results = {}
    for stream, kind in enumerate(MODEL_KINDS):
        if kind in kinds:
            results[kind] = train_model(kind, cfg, train, test, stream, track_curve)
    report = ExperimentReport(config=cfg.to_dict(), results=results)
    if report.margin is not None:
        logger.info(f"Fusion margin over best single modality: {report.margin:+.2f} points")
    return report


def control_config(cfg: RunConfig) -> RunConfig:
    """Same run without complementary corruption: no target occlusion, no speckle."""
    return replace(cfg, occlusion_rate=0.0, speckle=False)


@dataclass
class SeedSummary:
    seeds: List[int]
    reports: List[ExperimentReport]

    @property
    def margins(self) -> List[float]:
        return [r.margin for r in self.reports if r.margin is not None]

    @property
    def mean_margin(self) -> float:
        return float(np.mean(self.margins)) if self.margins else 0.0

    def mean_accuracy(self, kind: str) -> float:
        return float(np.mean([r.results[kind].accuracy for r in self.reports if kind in r.results]))

    def to_dict(self) -> dict:
        return {
            "seeds": list(self.seeds),
            "margins": self.margins,
            "mean_margin": self.mean_margin,
            "mean_accuracy": {k: self.mean_accuracy(k) for k in MODEL_KINDS
                              if any(k in r.results for r in self.reports)},
            "note": MARGIN_NOTE,
        }


def run_seeds(cfg: RunConfig, seeds: Sequence[int], track_curve: bool = False) -> SeedSummary:
    """Repeat the experiment for each seed and average the margins."""
    reports = [toy_fusion_experiment(replace(cfg, seed=int(s)), track_curve=track_curve) for s in seeds]
    summary = SeedSummary(seeds=[int(s) for s in seeds], reports=reports)
    logger.info(f"Mean margin over {len(seeds)} seeds: {summary.mean_margin:+.2f} points")
    return summary
