"""Wire schemas for the inference service (strict: unknown fields rejected)."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

BRANCHES = ("sam", "hq", "corrected")


class PointIn(BaseModel):
    model_config = ConfigDict(extra="forbid")
    x: float
    y: float
    label: Literal["positive", "negative"]


class PromptsIn(BaseModel):
    model_config = ConfigDict(extra="forbid")
    points: list[PointIn] = Field(default_factory=list)
    box: tuple[float, float, float, float] | None = None
    coarse_mask_rle: str | None = None


class SegmentRequest(BaseModel):
    """POST /segment body; responses are plain dicts with fixed key order."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)
    image_id: str | None = None
    image_png_b64: str | None = None
    prompts: PromptsIn
    return_branches: list[Literal["sam", "hq", "corrected"]] = Field(
        default=["sam", "hq", "corrected"], alias="return", min_length=1
    )
