"""Plain-numpy image resampling (no gradients flow through these)."""

from __future__ import annotations

import numpy as np


def bilinear_resize(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of (H,W) or (C,H,W), half-pixel-center convention."""
    squeeze = arr.ndim == 2
    x = arr[None] if squeeze else arr
    c, h, w = x.shape
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    y0 = np.clip(np.floor(ys), 0, h - 1).astype(np.int64)
    x0 = np.clip(np.floor(xs), 0, w - 1).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[None, :, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, None, :]
    top = x[:, y0[:, None], x0[None, :]] * (1 - wx) + x[:, y0[:, None], x1[None, :]] * wx
    bot = x[:, y1[:, None], x0[None, :]] * (1 - wx) + x[:, y1[:, None], x1[None, :]] * wx
    out = top * (1 - wy) + bot * wy
    return out[0] if squeeze else out


def nearest_resize(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbor resize of (H,W) or (C,H,W)."""
    squeeze = arr.ndim == 2
    x = arr[None] if squeeze else arr
    _, h, w = x.shape
    ys = np.clip(np.floor((np.arange(out_h) + 0.5) * (h / out_h)), 0, h - 1).astype(np.int64)
    xs = np.clip(np.floor((np.arange(out_w) + 0.5) * (w / out_w)), 0, w - 1).astype(np.int64)
    out = x[:, ys[:, None], xs[None, :]]
    return out[0] if squeeze else out


def avg_pool(arr: np.ndarray, factor: int) -> np.ndarray:
    """Non-overlapping mean pooling of (H,W) or (C,H,W) by an integer factor."""
    squeeze = arr.ndim == 2
    x = arr[None] if squeeze else arr
    c, h, w = x.shape
    if h % factor or w % factor:
        raise ValueError(f"avg_pool: {h}x{w} not divisible by {factor}")
    out = x.reshape(c, h // factor, factor, w // factor, factor).mean(axis=(2, 4))
    return out[0] if squeeze else out
