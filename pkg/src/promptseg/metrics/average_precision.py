"""Boundary average precision with greedy score-ordered matching.

Protocol per IoU threshold: predictions are sorted by descending score
(ties broken by insertion order), each is greedily matched to the
unmatched ground truth of its image with the highest boundary IoU, and
counts as a true positive when that IoU clears the threshold.  AP is
the 101-point interpolated area under the precision-recall curve;
the table reports the mean over thresholds plus fixed 0.5/0.75 points,
for both the default and the strict dilation ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..masks import BinaryMask
from .boundary import boundary_iou
from .report import MetricConfig

RECALL_GRID = np.linspace(0.0, 1.0, 101)


@dataclass(frozen=True)
class Detection:
    mask: BinaryMask
    score: float
    image_id: str


def _iou_matrix(preds: list[Detection], gts: dict[str, list[BinaryMask]], ratio: float) -> list[np.ndarray]:
    rows = []
    for det in preds:
        gt_list = gts.get(det.image_id, [])
        rows.append(np.array([boundary_iou(det.mask, g, ratio) for g in gt_list], dtype=np.float64))
    return rows

def _ap_at_threshold(
    order: list[int],
    iou_rows: list[np.ndarray],
    image_ids: list[str],
    num_gts: int,
    threshold: float,
) -> float:
    if num_gts == 0 or len(order) == 0:
        return 0.0
    matched: dict[str, set[int]] = {}
    tp = np.zeros(len(order), dtype=np.int64)
    for rank, idx in enumerate(order):
        ious = iou_rows[idx]
        if ious.size == 0:
            continue
        taken = matched.setdefault(image_ids[idx], set())
        best_j, best_v = -1, -1.0
        for j, v in enumerate(ious):
            if j not in taken and v > best_v:
                best_j, best_v = j, float(v)
        if best_j >= 0 and best_v >= threshold:
            taken.add(best_j)
            tp[rank] = 1
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(1 - tp)
    recalls = tp_cum / num_gts
    precisions = tp_cum / np.maximum(tp_cum + fp_cum, 1)
    # right-to-left precision envelope, then sample the recall grid
    envelope = np.maximum.accumulate(precisions[::-1])[::-1]
    idxs = np.searchsorted(recalls, RECALL_GRID, side="left")
    sampled = np.where(idxs < len(envelope), envelope[np.minimum(idxs, len(envelope) - 1)], 0.0)
    return float(sampled.mean())


def boundary_ap(
    preds: list[Detection | tuple],
    gts: dict[str, list[BinaryMask]],
    cfg: MetricConfig = MetricConfig(),
) -> dict:
    """AP table over BIoU thresholds at the default and strict band ratios."""
    dets = [p if isinstance(p, Detection) else Detection(*p) for p in preds]
    for d in dets:
        if not np.isfinite(d.score):
            raise ValueError(f"non-finite detection score for image {d.image_id!r}")
    num_gts = sum(len(v) for v in gts.values())
    # stable: score descending, insertion order breaks ties
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    image_ids = [d.image_id for d in dets]

    table: dict = {"num_predictions": len(dets), "num_gts": num_gts}
    for label, ratio in (("", cfg.dilation_ratio), ("_strict", cfg.strict_ratio)):
        rows = _iou_matrix(dets, gts, ratio)
        per_t = {t: _ap_at_threshold(order, rows, image_ids, num_gts, t) for t in cfg.ap_iou_thresholds}
        table[f"per_threshold{label}"] = {f"{t:.2f}": v for t, v in per_t.items()}
        table[f"ap{label}"] = float(np.mean(list(per_t.values()))) if per_t else 0.0
        table[f"ap50{label}"] = per_t.get(0.50, _ap_at_threshold(order, rows, image_ids, num_gts, 0.50))
        table[f"ap75{label}"] = per_t.get(0.75, _ap_at_threshold(order, rows, image_ids, num_gts, 0.75))
    return table
