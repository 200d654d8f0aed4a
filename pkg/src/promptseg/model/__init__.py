"""Miniature promptable segmentation model with the HQ refinement branch."""

from .config import (
    FULL_SCALE_CONFIG,
    ModelConfig,
    analytic_param_counts,
    is_hq_parameter,
    parameter_shapes,
)
from .network import ImageEmbeddings, MaskPrediction, SegModel, TokenBundle
from .prompts import PromptError, PromptSet

__all__ = [
    "ModelConfig",
    "FULL_SCALE_CONFIG",
    "parameter_shapes",
    "analytic_param_counts",
    "is_hq_parameter",
    "SegModel",
    "ImageEmbeddings",
    "TokenBundle",
    "MaskPrediction",
    "PromptSet",
    "PromptError",
]
