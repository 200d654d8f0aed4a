"""Training losses built on the autodiff ops."""

from __future__ import annotations

import functools

import numpy as np

from .. import numerics as N
from ..numerics import NumericsError, Tensor


@functools.lru_cache(maxsize=8)
def _bilinear_matrix(src: int, dst: int, dtype_name: str) -> np.ndarray:
    """Row-stochastic (dst, src) interpolation matrix, half-pixel centers."""
    w = np.zeros((dst, src))
    pos = (np.arange(dst) + 0.5) * (src / dst) - 0.5
    lo = np.clip(np.floor(pos), 0, src - 1).astype(int)
    hi = np.minimum(lo + 1, src - 1)
    frac = np.clip(pos - lo, 0.0, 1.0)
    w[np.arange(dst), lo] += 1.0 - frac
    w[np.arange(dst), hi] += frac
    return w.astype(dtype_name)


def upsample_logits(logits: Tensor, out_side: int) -> Tensor:
    """Differentiable bilinear upsample of a square logit map.

    Separable interpolation as two constant matmuls, so the backward
    pass is the exact adjoint for free.
    """
    m = logits.shape[-1]
    wy = Tensor(_bilinear_matrix(m, out_side, logits.data.dtype.name))
    wx_t = Tensor(_bilinear_matrix(m, out_side, logits.data.dtype.name).T.copy())
    return N.matmul(N.matmul(wy, logits), wx_t)


def bce_dice_loss(
    logits: Tensor,
    gt: np.ndarray,
    bce_weight: float = 1.0,
    dice_weight: float = 1.0,
    eps: float = 1.0,
) -> Tensor:
    """bce_w * mean BCE + dice_w * (1 - (2*sum(p*g)+eps) / (sum p + sum g + eps)).

    gt is a binary array matching the logit map's shape (the caller
    downsamples full-resolution ground truth with nearest neighbor).
    """
    loss, _ = bce_dice_with_parts(logits, gt, bce_weight, dice_weight, eps)
    return loss


def bce_dice_with_parts(
    logits: Tensor,
    gt: np.ndarray,
    bce_weight: float = 1.0,
    dice_weight: float = 1.0,
    eps: float = 1.0,
) -> tuple[Tensor, dict[str, float]]:
    """Same loss, plus the unweighted bce/dice term values for logging."""
    if bce_weight < 0 or dice_weight < 0 or (bce_weight == 0 and dice_weight == 0):
        raise ValueError("loss weights must be non-negative and not both zero")
    g = np.asarray(gt, dtype=logits.data.dtype)
    if g.shape != logits.shape:
        raise NumericsError(f"gt shape {g.shape} != logits shape {logits.shape}")
    loss = None
    parts: dict[str, float] = {}
    if bce_weight:
        bce = N.mean(N.bce_with_logits(logits, g))
        parts["bce"] = float(bce.data)
        loss = N.mul(bce, bce_weight)
    if dice_weight:
        p = N.sigmoid(logits)
        inter = N.sum(N.mul(p, Tensor(g)))
        denom = N.sum(p) + float(g.sum() + eps)
        dice = 1.0 - N.div(N.mul(inter, 2.0) + eps, denom)
        parts["dice"] = float(dice.data)
        dice = N.mul(dice, dice_weight)
        loss = dice if loss is None else loss + dice
    return loss, parts


def iou_regression_loss(iou_pred: Tensor, actual_iou: np.ndarray) -> Tensor:
    """Mean squared error between predicted and measured per-head IoU."""
    target = np.asarray(actual_iou, dtype=iou_pred.data.dtype)
    diff = N.sub(iou_pred, Tensor(target))
    return N.mean(N.mul(diff, diff))


def actual_head_ious(sam_logits: np.ndarray, gt_small: np.ndarray) -> np.ndarray:
    """Measured IoU of each thresholded logit map against the target."""
    g = gt_small.astype(bool)
    out = np.zeros(sam_logits.shape[0])
    for j in range(sam_logits.shape[0]):
        pred = sam_logits[j] > 0
        union = np.logical_or(pred, g).sum()
        out[j] = (np.logical_and(pred, g).sum() / union) if union else 1.0
    return out
