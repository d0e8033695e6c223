"""Sweeps of the fused model.

Each sweep retrains the fused model with one setting changed: filter or scan
kind, area block count, the set of enabled modules, the token sequence layout
or a fixed filter residual weight.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Sequence, Tuple

from ..core.settings import FILTER_KINDS, SCAN_KINDS, SEQUENCE_MODES, RunConfig
from ..data.synthetic import split_dataset
from .toytrain import prepare_batch, train_model

logger = logging.getLogger(__name__)

DEFAULT_AREA_KS = (1, 2, 4, 8)
DEFAULT_ALPHAS = (0.0, 0.25, 0.5, 0.75, 1.0)
MODULES = ("fam", "cmim", "afm")


@dataclass
class AblationRow:
    axis: str   # "filter", "scan", "area_k", "modules", "sequence" or "alpha"
    value: str
    accuracy: float
    final_loss: float

    def to_dict(self) -> dict:
        return {"axis": self.axis, "value": self.value, "accuracy": self.accuracy,
                "final_loss": self.final_loss}


@dataclass
class AblationReport:
    rows: List[AblationRow] = field(default_factory=list)
    seed: int = 0

    def by_axis(self, axis: str) -> Dict[str, float]:
        return {row.value: row.accuracy for row in self.rows if row.axis == axis}

    def to_dict(self) -> dict:
        return {"seed": self.seed, "rows": [row.to_dict() for row in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def format_table(self) -> str:
        lines = [f"{'axis':<10}{'value':<15}{'accuracy':>10}{'loss':>10}"]
        for row in self.rows:
            lines.append(f"{row.axis:<10}{row.value:<15}{row.accuracy:>9.2f}%{row.final_loss:>10.4f}")
        return "\n".join(lines)


def _train_fused(cfg: RunConfig, axis: str, value: str, cache: Dict) -> AblationRow:
    # responses depend only on the filter kind, so batches are shared across other settings
    key = cfg.filter_kind
    if key not in cache:
        if "_data" not in cache:
            cache["_data"] = split_dataset(cfg)
        train_set, test_set = cache["_data"]
        cache[key] = (prepare_batch(train_set, cfg), prepare_batch(test_set, cfg))
    train, test = cache[key]
    result = train_model("fused", cfg, train, test, stream=2, track_curve=False)
    logger.info(f"Ablation {axis}={value}: {result.accuracy:.2f}%")
    return AblationRow(axis=axis, value=value, accuracy=result.accuracy,
                       final_loss=result.losses[-1] if result.losses else float("nan"))


def run_ablation(cfg: RunConfig, filter_kinds: Sequence[str] = FILTER_KINDS,
                 scan_kinds: Sequence[str] = SCAN_KINDS) -> AblationReport:
    """Train the fused model once per filter kind and once per scan kind."""
    cfg.validate()
    cache: Dict = {}
    report = AblationReport(seed=cfg.seed)
    for kind in filter_kinds:
        report.rows.append(_train_fused(replace(cfg, filter_kind=kind).validate(), "filter", kind, cache))
    for kind in scan_kinds:
        report.rows.append(_train_fused(replace(cfg, scan_kind=kind).validate(), "scan", kind, cache))
    return report


def run_area_sweep(cfg: RunConfig, ks: Sequence[int] = DEFAULT_AREA_KS) -> AblationReport:
    """Train the fused model for each AFM block count."""
    cfg.validate()
    cache: Dict = {}
    report = AblationReport(seed=cfg.seed)
    for k in ks:
        report.rows.append(_train_fused(replace(cfg, area_k=int(k)).validate(), "area_k", str(k), cache))
    return report


def module_combinations() -> List[Tuple[bool, bool, bool]]:
    """All eight (fam, cmim, afm) switch settings, everything enabled first."""
    return list(itertools.product((True, False), repeat=len(MODULES)))


def module_label(enabled: Sequence[bool]) -> str:
    names = [name for name, on in zip(MODULES, enabled) if on]
    return "+".join(names) if names else "none"


def run_module_ablation(cfg: RunConfig) -> AblationReport:
    """Train the fused model with every on/off combination of FAM, CMIM and AFM."""
    cfg.validate()
    cache: Dict = {}
    report = AblationReport(seed=cfg.seed)
    for fam, cmim, afm in module_combinations():
        variant = replace(cfg, use_fam=fam, use_cmim=cmim, use_afm=afm).validate()
        report.rows.append(_train_fused(variant, "modules", module_label((fam, cmim, afm)), cache))
    return report


def run_sequence_ablation(cfg: RunConfig, modes: Sequence[str] = SEQUENCE_MODES) -> AblationReport:
    """Interleaved against concatenated token sequences in the cross-modal scan."""
    cfg.validate()
    cache: Dict = {}
    report = AblationReport(seed=cfg.seed)
    for mode in modes:
        report.rows.append(_train_fused(replace(cfg, sequence_mode=mode).validate(), "sequence", mode, cache))
    return report


def run_alpha_sweep(cfg: RunConfig, alphas: Sequence[float] = DEFAULT_ALPHAS) -> AblationReport:
    """Train with the filter residual weight frozen at each value."""
    cfg.validate()
    cache: Dict = {}
    report = AblationReport(seed=cfg.seed)
    for alpha in alphas:
        variant = replace(cfg, alpha_init=float(alpha), learn_alpha=False, use_fam=True).validate()
        report.rows.append(_train_fused(variant, "alpha", f"{float(alpha):g}", cache))
    return report
