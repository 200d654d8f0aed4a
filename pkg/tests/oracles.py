"""Independent brute-force implementations used as test oracles.

These deliberately avoid the library's distance-transform and
vectorized PR machinery: bands come from exhaustive pixel-pair
distances, AP from a literal simulation of the matching protocol.
"""

from __future__ import annotations

import math

import numpy as np

from promptseg.masks import BinaryMask
from promptseg.metrics import boundary_iou


def brute_force_min_d2(mask: BinaryMask) -> np.ndarray:
    """Exhaustive min squared distance from each foreground pixel to any
    background pixel (including a virtual background ring just outside
    the frame); background pixels get 0."""
    h, w = mask.a.shape
    out = np.zeros((h, w), dtype=np.int64)
    ys, xs = np.nonzero(mask.a)
    if ys.size == 0:
        return out
    bg_ys, bg_xs = np.nonzero(~mask.a)
    ring = []
    for x in range(-1, w + 1):
        ring.append((-1, x))
        ring.append((h, x))
    for y in range(0, h):
        ring.append((y, -1))
        ring.append((y, w))
    all_bg_y = np.concatenate([bg_ys, np.array([p[0] for p in ring])])
    all_bg_x = np.concatenate([bg_xs, np.array([p[1] for p in ring])])
    dy = ys[:, None] - all_bg_y[None, :]
    dx = xs[:, None] - all_bg_x[None, :]
    out[ys, xs] = (dy * dy + dx * dx).min(axis=1)
    return out


def band_from_min_d2(mask: BinaryMask, min_d2: np.ndarray, ratio: float) -> np.ndarray:
    h, w = mask.a.shape
    d = max(int(math.ceil(ratio * math.hypot(w, h) - 1e-9)), 1)
    return mask.a & (min_d2 <= d * d)


def brute_force_band(mask: BinaryMask, ratio: float) -> np.ndarray:
    """Mask pixels within the integer band radius of the contour."""
    return band_from_min_d2(mask, brute_force_min_d2(mask), ratio)


def brute_force_boundary_iou(pred: BinaryMask, gt: BinaryMask, ratio: float) -> float:
    bp = brute_force_band(pred, ratio)
    bg_ = brute_force_band(gt, ratio)
    union = np.logical_or(bp, bg_).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(bp, bg_).sum() / union)


def naive_boundary_ap_at_threshold(
    preds: list[tuple[BinaryMask, float, str]],
    gts: dict[str, list[BinaryMask]],
    threshold: float,
    ratio: float,
) -> float:
    """Literal simulation: sort by score (stable), greedily take the best
    unmatched GT, then integrate the 101-point interpolated PR curve."""
    num_gts = sum(len(v) for v in gts.values())
    if num_gts == 0 or not preds:
        return 0.0
    order = sorted(range(len(preds)), key=lambda i: (-preds[i][1], i))
    matched: dict[str, set] = {img: set() for img in gts}
    flags = []
    for i in order:
        mask, _score, img = preds[i]
        best_j, best_v = -1, -1.0
        for j, gt_mask in enumerate(gts.get(img, [])):
            if j in matched.get(img, set()):
                continue
            v = boundary_iou(mask, gt_mask, ratio)
            if v > best_v:
                best_j, best_v = j, v
        if best_j >= 0 and best_v >= threshold:
            matched.setdefault(img, set()).add(best_j)
            flags.append(True)
        else:
            flags.append(False)
    precisions, recalls = [], []
    tp = fp = 0
    for hit in flags:
        tp, fp = tp + int(hit), fp + int(not hit)
        precisions.append(tp / (tp + fp))
        recalls.append(tp / num_gts)
    total = 0.0
    for gi in range(101):
        r = gi / 100.0
        best = 0.0
        for p, rec in zip(precisions, recalls):
            if rec >= r and p > best:
                best = p
        total += best
    return total / 101.0
