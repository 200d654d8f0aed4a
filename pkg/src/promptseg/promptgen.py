"""Prompt synthesis and degradation from ground-truth masks.

Everything here is a pure function of (inputs, rng); training and
evaluation protocols draw boxes, points, and degraded coarse masks
from these primitives.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .imaging import bilinear_resize, nearest_resize
from .masks import BinaryMask, MaskError, squared_distance_to_background, squared_distance_to_foreground
from .metrics.boundary import band_radius


class Box(NamedTuple):
    """Axis-aligned box, half-open pixel bounds: x0 <= x < x1, y0 <= y < y1."""

    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0


class LabeledPoint(NamedTuple):
    x: float
    y: float
    label: str  # "positive" | "negative"


@dataclass(frozen=True)
class NoiseSpec:
    """Degradation strengths for prompts.

    The paper's robustness study uses box noise scales 0.2 and 0.4; the
    Gaussian mask degradation strength and band width are documented
    choices (the source protocol does not pin them).
    """

    box_noise_scale: float = 0.0
    mask_noise_sigma: float = 1.0
    band_ratio: float = 0.02

    def __post_init__(self):
        if self.box_noise_scale < 0 or not self.box_noise_scale < 1:
            raise ValueError("box_noise_scale must be in [0, 1)")
        if self.mask_noise_sigma < 0 or self.band_ratio < 0:
            raise ValueError("noise parameters must be non-negative")


def box_from_mask(mask: BinaryMask) -> Box:
    """Tight bounding box of the foreground, half-open convention."""
    ys, xs = np.nonzero(mask.a)
    if ys.size == 0:
        raise MaskError("box_from_mask on an empty mask")
    return Box(float(xs.min()), float(ys.min()), float(xs.max() + 1), float(ys.max() + 1))


def noise_box(box: Box, scale: float, rng: np.random.Generator, bounds: tuple[int, int]) -> Box:
    """Shift each corner by uniform noise up to ±scale·(w/2, h/2), then clamp.

    Corners are re-ordered to keep x0 < x1 and y0 < y1; a box collapsed
    by clamping is re-inflated to at least one pixel.
    """
    if scale < 0:
        raise ValueError("noise scale must be >= 0")
    w_img, h_img = bounds
    half_w, half_h = scale * box.width / 2.0, scale * box.height / 2.0
    # fixed draw order: (dx0, dy0, dx1, dy1)
    dx0 = rng.uniform(-half_w, half_w)
    dy0 = rng.uniform(-half_h, half_h)
    dx1 = rng.uniform(-half_w, half_w)
    dy1 = rng.uniform(-half_h, half_h)
    xs = sorted((min(max(box.x0 + dx0, 0.0), w_img), min(max(box.x1 + dx1, 0.0), w_img)))
    ys = sorted((min(max(box.y0 + dy0, 0.0), h_img), min(max(box.y1 + dy1, 0.0), h_img)))
    x0, x1 = xs
    y0, y1 = ys
    if x1 - x0 < 1.0:
        x1 = min(w_img, x0 + 1.0)
        x0 = x1 - 1.0
    if y1 - y0 < 1.0:
        y1 = min(h_img, y0 + 1.0)
        y0 = y1 - 1.0
    return Box(x0, y0, x1, y1)


def center_point(mask: BinaryMask) -> tuple[int, int]:
    """Argmax of the interior distance transform; ties go to smallest (y, x)."""
    if mask.is_empty():
        raise MaskError("center_point on an empty mask")
    d2 = squared_distance_to_background(mask.a, border_is_background=True)
    idx = int(np.argmax(d2))  # row-major argmax = smallest (y, then x) tie-break
    y, x = divmod(idx, mask.width)
    return x, y


def sample_points(
    mask: BinaryMask, n_pos: int, n_neg: int, rng: np.random.Generator
) -> list[LabeledPoint]:
    """Uniform labeled points without replacement: positives inside, negatives outside."""
    fg = np.flatnonzero(mask.bits)
    bg = np.flatnonzero(~mask.bits)
    if fg.size < n_pos:
        raise MaskError(f"mask has {fg.size} foreground pixels, needs {n_pos}")
    if bg.size < n_neg:
        raise MaskError(f"mask has {bg.size} background pixels, needs {n_neg}")
    points: list[LabeledPoint] = []
    for flat in rng.choice(fg, size=n_pos, replace=False) if n_pos else []:
        y, x = divmod(int(flat), mask.width)
        points.append(LabeledPoint(float(x), float(y), "positive"))
    for flat in rng.choice(bg, size=n_neg, replace=False) if n_neg else []:
        y, x = divmod(int(flat), mask.width)
        points.append(LabeledPoint(float(x), float(y), "negative"))
    return points


def degradation_band(mask: BinaryMask, band_ratio: float) -> np.ndarray:
    """Two-sided contour band: pixels within the band radius on either side.

    The foreground side uses the same construction as the metric band;
    the background side mirrors it through the distance to foreground
    (not the frame border, which is irrelevant to the object contour).
    """
    r = band_radius(band_ratio, mask.width, mask.height)
    r2 = r * r
    inner = mask.a & (squared_distance_to_background(mask.a, border_is_background=True) <= r2)
    outer = ~mask.a & (squared_distance_to_foreground(mask.a) <= r2)
    return inner | outer


def degrade_mask(mask: BinaryMask, spec: NoiseSpec, rng: np.random.Generator) -> BinaryMask:
    """Gaussian-noise the signed mask inside the contour band, re-threshold at 0.

    Pixels outside the band are untouched, so XOR(degraded, mask) is
    always a subset of the band; sigma 0 is the identity.
    """
    if spec.band_ratio <= 0:
        raise ValueError("degrade_mask requires band_ratio > 0")
    band = degradation_band(mask, spec.band_ratio)
    signed = np.where(mask.a, 1.0, -1.0)
    noise = rng.normal(0.0, spec.mask_noise_sigma, size=int(band.sum()))
    signed[band] += noise
    out = mask.a.copy()
    out[band] = signed[band] > 0
    return BinaryMask(out)


def large_scale_jitter(
    image: np.ndarray,
    masks: list[BinaryMask],
    rng: np.random.Generator,
    scale_range: tuple[float, float] = (0.5, 2.0),
    return_transform: bool = False,
):
    """Random rescale then crop/pad back to size, identically for image and masks.

    Bilinear for the image, nearest for masks.  If any mask comes out
    empty the scale is resampled (up to 10 retries), after which the
    inputs are returned untransformed.
    """
    lo, hi = scale_range
    if lo <= 0 or hi < lo:
        raise ValueError(f"bad scale range {scale_range}")
    c, size, size_w = image.shape
    if size != size_w:
        raise ValueError("large_scale_jitter expects square images")

    for _ in range(10):
        s = float(rng.uniform(lo, hi))
        new = max(1, round(size * s))
        img_r = bilinear_resize(image, new, new)
        masks_r = [nearest_resize(m.a.astype(np.float64), new, new) > 0.5 for m in masks]
        if new >= size:
            off_y = int(rng.integers(0, new - size + 1))
            off_x = int(rng.integers(0, new - size + 1))
            img_o = img_r[:, off_y : off_y + size, off_x : off_x + size]
            masks_o = [m[off_y : off_y + size, off_x : off_x + size] for m in masks_r]
            transform = {"scale": s, "crop": (off_x, off_y), "pad": (0, 0)}
        else:
            pad_y, pad_x = (size - new) // 2, (size - new) // 2
            img_o = np.zeros((c, size, size), dtype=image.dtype)
            img_o[:, pad_y : pad_y + new, pad_x : pad_x + new] = img_r
            masks_o = []
            for m in masks_r:
                mm = np.zeros((size, size), dtype=bool)
                mm[pad_y : pad_y + new, pad_x : pad_x + new] = m
                masks_o.append(mm)
            transform = {"scale": s, "crop": (0, 0), "pad": (pad_x, pad_y)}
        if all(m.any() for m in masks_o):
            out = (np.ascontiguousarray(img_o), [BinaryMask(m) for m in masks_o])
            return (*out, transform) if return_transform else out

    out = (image.copy(), [m.copy() for m in masks])
    if return_transform:
        return (*out, {"scale": 1.0, "crop": (0, 0), "pad": (0, 0)})
    return out
