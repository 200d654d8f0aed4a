"""FastAPI inference service wrapping the core model."""

from .app import MAX_PNG_BYTES, create_app
from .schemas import BRANCHES, PointIn, PromptsIn, SegmentRequest

__all__ = ["create_app", "MAX_PNG_BYTES", "SegmentRequest", "PromptsIn", "PointIn", "BRANCHES"]
