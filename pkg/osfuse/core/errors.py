"""Exception hierarchy shared by every osfuse module."""

from __future__ import annotations

from typing import Optional


class OsfuseError(Exception):
    """Base class for all errors raised by osfuse."""


class InputError(OsfuseError, ValueError):
    """User-supplied data is unusable (unknown ids, bad config values, empty inputs)."""


class DimensionError(OsfuseError, ValueError):
    """Array shapes do not fit the operation."""


class ContractError(OsfuseError, ValueError):
    """A documented precondition of an operation was violated."""


class DegeneracyError(OsfuseError, ValueError):
    """Geometry collapsed (zero area, collinear points, singular covariance)."""


class LabelParseError(InputError):
    """A label line could not be parsed."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class LabelValidationError(InputError):
    """A label line parsed but holds an out-of-range value."""

    def __init__(self, line: int, value: float, message: str = "coordinate outside [0, 1]"):
        self.line = line
        self.value = value
        super().__init__(f"line {line}: {message}: {value!r}")


class ImageFormatError(InputError):
    """A raster file is not a supported PNM image or is truncated."""

    def __init__(self, message: str, magic: Optional[bytes] = None):
        self.magic = magic
        super().__init__(message)


class TrainingDivergedError(OsfuseError, RuntimeError):
    """Loss became non-finite during training."""
