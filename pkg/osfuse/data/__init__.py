"""Label and image I/O, dataset statistics, pair similarity and synthetic data."""

from .labels import LabeledInstance, read_label_file, read_label_dir, write_label_file
from .pnm import read_image, write_image
from .detections import DetectionImporter
from .statistics import DatasetStats, dataset_stats
from .similarity import PairMetrics, pair_metrics, aggregate_pair_metrics
from .synthetic import SyntheticDataset, generate_synthetic_pairs, write_dataset

__all__ = [
    'LabeledInstance',
    'read_label_file',
    'read_label_dir',
    'write_label_file',
    'read_image',
    'write_image',
    'DetectionImporter',
    'DatasetStats',
    'dataset_stats',
    'PairMetrics',
    'pair_metrics',
    'aggregate_pair_metrics',
    'SyntheticDataset',
    'generate_synthetic_pairs',
    'write_dataset',
]
