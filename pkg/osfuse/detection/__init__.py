"""Oriented boxes, rotated IoU, detection losses, NMS and COCO-style evaluation."""

from .boxes import OrientedBox, Quad, GaussianBox, obb_to_quad, quad_to_obb, rotated_iou, probiou
from .losses import LossTargets, LossTerms, loss_terms
from .evaluation import CATEGORIES, Detection, EvalReport, average_precision, evaluate
from .nms import rotated_nms, postprocess_detections

__all__ = [
    'OrientedBox',
    'Quad',
    'GaussianBox',
    'obb_to_quad',
    'quad_to_obb',
    'rotated_iou',
    'probiou',
    'LossTargets',
    'LossTerms',
    'loss_terms',
    'CATEGORIES',
    'Detection',
    'EvalReport',
    'average_precision',
    'evaluate',
    'rotated_nms',
    'postprocess_detections',
]
