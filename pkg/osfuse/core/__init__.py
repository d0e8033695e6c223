"""Errors, configuration, seeded randomness and the small autograd engine."""

from .errors import (
    OsfuseError,
    InputError,
    DimensionError,
    ContractError,
    DegeneracyError,
    LabelParseError,
    LabelValidationError,
    ImageFormatError,
    TrainingDivergedError,
)
from .settings import RunConfig, parse_overrides
from .rng import substream
from .tensor import Tensor, as_tensor, parameter
from .gradcheck import GradRecord, analytic_gradients, finite_diff_check

__all__ = [
    'OsfuseError',
    'InputError',
    'DimensionError',
    'ContractError',
    'DegeneracyError',
    'LabelParseError',
    'LabelValidationError',
    'ImageFormatError',
    'TrainingDivergedError',
    'RunConfig',
    'parse_overrides',
    'substream',
    'Tensor',
    'as_tensor',
    'parameter',
    'GradRecord',
    'analytic_gradients',
    'finite_diff_check',
]
