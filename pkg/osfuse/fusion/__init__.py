"""Filter augmentation, scan orders, cross-modal state-space scanning and area attention."""

from .filters import FilterKind, FilterAugmentParams, apply_filter, filter_augment
from .scan_orders import (
    FeatureMap,
    ScanKind,
    ScanPermutation,
    concat_traditional,
    interleave_iir,
    deinterleave,
    scan_permutation,
    vertical_permutation,
)
from .ssm import SSMParams, CMIMConfig, CMIMParams, selective_scan, cmim_forward
from .area_attention import AreaAxis, AreaConfig, AFMParams, FlopCounter, afm_fuse

__all__ = [
    'FilterKind',
    'FilterAugmentParams',
    'apply_filter',
    'filter_augment',
    'FeatureMap',
    'ScanKind',
    'ScanPermutation',
    'concat_traditional',
    'interleave_iir',
    'deinterleave',
    'scan_permutation',
    'vertical_permutation',
    'SSMParams',
    'CMIMConfig',
    'CMIMParams',
    'selective_scan',
    'cmim_forward',
    'AreaAxis',
    'AreaConfig',
    'AFMParams',
    'FlopCounter',
    'afm_fuse',
]
