"""Run configuration with JSON persistence."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Tuple

from .errors import InputError

logger = logging.getLogger(__name__)

FILTER_KINDS = ("wst", "canny", "haar", "hog", "grad")
SCAN_KINDS = ("bidirectional", "zorder", "zigzag", "hilbert")
AREA_AXES = ("horizontal", "vertical")
SEQUENCE_MODES = ("interleave", "concat")


@dataclass
class RunConfig:
    """Every knob of a run; defaults are the documented configuration."""
    # FAM
    filter_kind: str = "grad"
    alpha_init: float = 0.0
    learn_alpha: bool = True  # False keeps alpha fixed at alpha_init

    # CMIM
    scan_kind: str = "hilbert"
    hilbert_direction: int = 0  # 0-7, symmetry of the canonical curve
    state_dim: int = 4
    levels: str = "3"  # comma-separated subset of 3,4,5
    sequence_mode: str = "interleave"  # or "concat": all optical tokens, then all SAR tokens

    # AFM
    area_k: int = 4
    area_axis: str = "horizontal"
    head_dim: int = 8

    # Fused-model modules; without AFM the two maps are averaged
    use_fam: bool = True
    use_cmim: bool = True
    use_afm: bool = True

    # Toy trunk and training
    embed_dim: int = 8
    seed: int = 0
    epochs: int = 30
    learning_rate: float = 0.01
    momentum: float = 0.937
    weight_decay: float = 0.0005
    batch_size: int = 32

    # Synthetic data
    n_train: int = 480
    n_test: int = 240
    image_size: int = 64
    occlusion_rate: float = 0.4  # share of images whose target is covered in modality A
    speckle: bool = True
    speckle_shape: float = 1.0

    @property
    def level_set(self) -> Tuple[int, ...]:
        """Pyramid levels as sorted integers."""
        try:
            parsed = sorted({int(part) for part in self.levels.split(",") if part.strip()})
        except ValueError as e:
            raise InputError(f"levels must be comma-separated integers, got '{self.levels}'") from e
        return tuple(parsed)

    def validate(self) -> "RunConfig":
        """Check enumerations and ranges; returns self for chaining."""
        if self.filter_kind not in FILTER_KINDS:
            raise InputError(f"filter_kind must be one of {FILTER_KINDS}, got '{self.filter_kind}'")
        if self.scan_kind not in SCAN_KINDS:
            raise InputError(f"scan_kind must be one of {SCAN_KINDS}, got '{self.scan_kind}'")
        if self.area_axis not in AREA_AXES:
            raise InputError(f"area_axis must be one of {AREA_AXES}, got '{self.area_axis}'")
        if self.sequence_mode not in SEQUENCE_MODES:
            raise InputError(f"sequence_mode must be one of {SEQUENCE_MODES}, got '{self.sequence_mode}'")
        if not 0 <= self.hilbert_direction <= 7:
            raise InputError(f"hilbert_direction must be in 0..7, got {self.hilbert_direction}")
        levels = self.level_set
        if not levels or any(level not in (3, 4, 5) for level in levels):
            raise InputError(f"levels must be a nonempty subset of 3,4,5, got '{self.levels}'")
        if self.image_size % 32 != 0 or self.image_size <= 0:
            raise InputError(f"image_size must be a positive multiple of 32, got {self.image_size}")
        for name in ("state_dim", "area_k", "head_dim", "embed_dim", "epochs", "batch_size",
                     "n_train", "n_test"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.occlusion_rate <= 1.0:
            raise InputError(f"occlusion_rate must be in [0, 1], got {self.occlusion_rate}")
        if self.seed < 0:
            raise InputError(f"seed must be non-negative, got {self.seed}")
        if self.learning_rate <= 0 or self.speckle_shape <= 0:
            raise InputError("learning_rate and speckle_shape must be positive")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path: Path) -> None:
        """Write every field to a JSON file."""
        payload = {f.name: getattr(self, f.name) for f in fields(self)}
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Optional[Path]) -> "RunConfig":
        """Load a JSON config on top of the defaults.

        A missing path yields the defaults; unknown keys are ignored with a warning.
        """
        instance = cls()
        if path is None:
            return instance
        path = Path(path)
        if not path.exists():
            logger.warning(f"Config file {path} not found, using defaults")
            return instance
        try:
            stored = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise InputError(f"{path}: invalid JSON ({e})") from e
        if not isinstance(stored, dict):
            raise InputError(f"{path}: top level must be a JSON object")
        return instance.with_overrides(stored)

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        """Return a copy with values coerced to each field's default type."""
        known = {f.name: f for f in fields(self)}
        changes = {}
        for name, raw in overrides.items():
            if name not in known:
                logger.warning(f"Ignoring unknown config key '{name}'")
                continue
            changes[name] = _coerce(name, raw, getattr(self, name))
        return replace(self, **changes)


def _coerce(name: str, raw: Any, default: Any) -> Any:
    # Type conversion based on the default value type
    try:
        if isinstance(default, bool):
            if isinstance(raw, bool):
                return raw
            if isinstance(raw, str):
                return raw.strip().lower() in ("true", "1", "yes", "on")
            return bool(raw)
        if isinstance(default, int):
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(f"not an integer: {raw}")
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(raw, (list, tuple)):
            return ",".join(str(item) for item in raw)
        return str(raw)
    except (TypeError, ValueError) as e:
        raise InputError(f"config key '{name}': cannot use {raw!r} ({e})") from e


def parse_overrides(pairs) -> dict:
    """Turn ``["key=value", ...]`` CLI pairs into a mapping."""
    result = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise InputError(f"override must look like key=value, got '{pair}'")
        result[key.strip()] = value.strip()
    return result
