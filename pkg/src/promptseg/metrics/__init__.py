"""Mask-quality evaluation: IoU, boundary IoU, recall curves, boundary AP."""

from .average_precision import Detection, boundary_ap
from .boundary import band_radius, boundary_band, boundary_iou, mask_iou
from .report import (
    DEFAULT_AP_THRESHOLDS,
    DEFAULT_RECALL_THRESHOLDS,
    EvalReport,
    MetricConfig,
    aggregate,
    format_table,
    recall_curve,
    recall_curve_from_values,
)

__all__ = [
    "mask_iou",
    "boundary_band",
    "boundary_iou",
    "band_radius",
    "aggregate",
    "recall_curve",
    "recall_curve_from_values",
    "boundary_ap",
    "Detection",
    "EvalReport",
    "MetricConfig",
    "format_table",
    "DEFAULT_AP_THRESHOLDS",
    "DEFAULT_RECALL_THRESHOLDS",
]
