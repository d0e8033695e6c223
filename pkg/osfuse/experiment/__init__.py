"""Toy fusion experiment: models, optimizer, training loop and ablations."""

from .models import FusedModel, SingleModalityModel, build_model
from .optim import SGD
from .toytrain import ExperimentReport, toy_fusion_experiment, run_seeds
from .ablation import AblationReport, run_ablation, run_area_sweep

__all__ = [
    'FusedModel',
    'SingleModalityModel',
    'build_model',
    'SGD',
    'ExperimentReport',
    'toy_fusion_experiment',
    'run_seeds',
    'AblationReport',
    'run_ablation',
    'run_area_sweep',
]
