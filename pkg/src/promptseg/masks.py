"""Binary masks and exact Euclidean distance morphology.

Distances are kept as exact squared integers so that radius
comparisons (band membership, erosion) are free of float rounding at
tie points: the optimized path and any brute-force oracle compare the
same integers against the same squared radius.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage


class MaskError(ValueError):
    pass


class BinaryMask:
    """Row-major H×W boolean mask; points are addressed as (x, y)."""

    __slots__ = ("a",)

    def __init__(self, array: np.ndarray):
        a = np.asarray(array)
        if a.ndim != 2:
            raise MaskError(f"mask must be 2-D, got shape {a.shape}")
        self.a = a.astype(bool, copy=False)

    @classmethod
    def zeros(cls, width: int, height: int) -> BinaryMask:
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def from_bits(cls, width: int, height: int, bits) -> BinaryMask:
        flat = np.asarray(bits, dtype=bool).reshape(-1)
        if flat.size != width * height:
            raise MaskError(f"expected {width * height} bits, got {flat.size}")
        return cls(flat.reshape(height, width))

    @property
    def width(self) -> int:
        return self.a.shape[1]

    @property
    def height(self) -> int:
        return self.a.shape[0]

    @property
    def bits(self) -> np.ndarray:
        return self.a.reshape(-1)

    @property
    def shape(self) -> tuple[int, int]:
        return self.a.shape

    def area(self) -> int:
        return int(self.a.sum())

    def is_empty(self) -> bool:
        return not self.a.any()

    def copy(self) -> BinaryMask:
        return BinaryMask(self.a.copy())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BinaryMask)
            and self.a.shape == other.a.shape
            and bool(np.array_equal(self.a, other.a))
        )

    def __hash__(self):
        raise TypeError("BinaryMask is unhashable")

    def __repr__(self) -> str:
        return f"BinaryMask({self.width}x{self.height}, area={self.area()})"


def _exact_sq(dist: np.ndarray) -> np.ndarray:
    # EDT distances are sqrt of integers; squaring and rounding recovers
    # the integer exactly (error << 0.5 for any desk-scale image)
    return np.rint(dist * dist).astype(np.int64)


def squared_distance_to_background(mask: np.ndarray, border_is_background: bool = True) -> np.ndarray:
    """Exact squared distance from each pixel to the nearest background pixel.

    Background pixels get 0.  With border_is_background the frame is
    treated as implicitly padded with background, so a mask touching
    the border still has a contour there.
    """
    m = np.asarray(mask, dtype=bool)
    if border_is_background:
        padded = np.pad(m, 1, constant_values=False)
        d = ndimage.distance_transform_edt(padded)
        return _exact_sq(d[1:-1, 1:-1])
    if m.all():
        return np.full(m.shape, _max_sq(m.shape), dtype=np.int64)
    return _exact_sq(ndimage.distance_transform_edt(m))


def squared_distance_to_foreground(mask: np.ndarray) -> np.ndarray:
    """Exact squared distance from each pixel to the nearest foreground pixel."""
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        return np.full(m.shape, _max_sq(m.shape), dtype=np.int64)
    return _exact_sq(ndimage.distance_transform_edt(~m))


def _max_sq(shape: tuple[int, int]) -> int:
    return int(shape[0] ** 2 + shape[1] ** 2 + 1)


def erode(mask: np.ndarray, radius: float, border_is_background: bool = True) -> np.ndarray:
    """Erosion by a Euclidean disk: keep pixels farther than radius from background."""
    d2 = squared_distance_to_background(mask, border_is_background)
    return d2 > radius * radius


def dilate(mask: np.ndarray, radius: float) -> np.ndarray:
    """Dilation by a Euclidean disk: include pixels within radius of foreground."""
    d2 = squared_distance_to_foreground(mask)
    return d2 <= radius * radius


def morph_open(mask: np.ndarray, radius: float) -> np.ndarray:
    return dilate(erode(mask, radius, border_is_background=False), radius)


def morph_close(mask: np.ndarray, radius: float) -> np.ndarray:
    return erode(dilate(mask, radius), radius, border_is_background=False)


def count_holes(mask: np.ndarray) -> int:
    """Number of enclosed background regions (flood fill from the border)."""
    m = np.asarray(mask, dtype=bool)
    bg_labels, n = ndimage.label(~m)
    if n == 0:
        return 0
    border = np.zeros_like(m)
    border[0, :] = border[-1, :] = border[:, 0] = border[:, -1] = True
    outside = set(np.unique(bg_labels[border & ~m])) - {0}
    all_labels = set(range(1, n + 1))
    return len(all_labels - outside)
