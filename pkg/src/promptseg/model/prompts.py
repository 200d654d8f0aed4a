"""User-facing prompt container."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..masks import BinaryMask
from ..promptgen import Box, LabeledPoint


class PromptError(ValueError):
    pass


@dataclass
class PromptSet:
    """A query: labeled points, a box, and/or a coarse mask."""

    points: list[LabeledPoint] = field(default_factory=list)
    box: Box | None = None
    coarse_mask: BinaryMask | None = None

    def validate(self, image_size: int) -> None:
        if not self.points and self.box is None and self.coarse_mask is None:
            raise PromptError("prompt set must contain at least one element")
        for p in self.points:
            if p.label not in ("positive", "negative"):
                raise PromptError(f"unknown point label {p.label!r}")
            if not (0 <= p.x < image_size and 0 <= p.y < image_size):
                raise PromptError(f"point ({p.x}, {p.y}) outside [0, {image_size})")
        if self.box is not None:
            b = self.box
            if not (0 <= b.x0 < b.x1 <= image_size and 0 <= b.y0 < b.y1 <= image_size):
                raise PromptError(f"invalid box {tuple(b)} for image size {image_size}")
        if self.coarse_mask is not None:
            if self.coarse_mask.shape != (image_size, image_size):
                raise PromptError(
                    f"coarse mask shape {self.coarse_mask.shape} != image {image_size}"
                )

    @property
    def num_sparse_tokens(self) -> int:
        return len(self.points) + (2 if self.box is not None else 0)
