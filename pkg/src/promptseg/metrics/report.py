"""Dataset-level aggregation: mIoU, mBIoU, recall curves, reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..masks import BinaryMask, MaskError
from .boundary import boundary_iou, mask_iou

DEFAULT_AP_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
DEFAULT_RECALL_THRESHOLDS = (0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass(frozen=True)
class MetricConfig:
    dilation_ratio: float = 0.02
    strict_ratio: float = 0.01
    ap_iou_thresholds: tuple[float, ...] = DEFAULT_AP_THRESHOLDS
    recall_thresholds: tuple[float, ...] = DEFAULT_RECALL_THRESHOLDS

    def __post_init__(self):
        for r in (self.dilation_ratio, self.strict_ratio):
            if not 0.0 < r < 1.0:
                raise ValueError(f"dilation ratio must be in (0,1), got {r}")
        for seq in (self.ap_iou_thresholds, self.recall_thresholds):
            if list(seq) != sorted(seq):
                raise ValueError("thresholds must be sorted ascending")


@dataclass
class EvalReport:
    """Per-instance and aggregate mask-quality statistics for one prediction set."""

    iou: list[float]
    biou: list[float]
    biou_strict: list[float]
    miou: float
    mbiou: float
    mbiou_strict: float
    recall_curve: dict[float, float]
    ap_table: dict | None = field(default=None)

    def to_dict(self) -> dict:
        out = {
            "miou": self.miou,
            "mbiou": self.mbiou,
            "mbiou_strict": self.mbiou_strict,
            "recall_curve": {f"{t:g}": v for t, v in self.recall_curve.items()},
            "per_instance": {
                "iou": self.iou,
                "biou": self.biou,
                "biou_strict": self.biou_strict,
            },
        }
        if self.ap_table is not None:
            out["ap_table"] = self.ap_table
        return out

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def aggregate(pairs: list[tuple[BinaryMask, BinaryMask]], cfg: MetricConfig = MetricConfig()) -> EvalReport:
    """Unweighted means of per-instance IoU and boundary IoU (default + strict)."""
    if not pairs:
        raise MaskError("aggregate over an empty pair list")
    iou = [mask_iou(p, g) for p, g in pairs]
    biou = [boundary_iou(p, g, cfg.dilation_ratio) for p, g in pairs]
    strict = [boundary_iou(p, g, cfg.strict_ratio) for p, g in pairs]
    return EvalReport(
        iou=iou,
        biou=biou,
        biou_strict=strict,
        miou=_mean(iou),
        mbiou=_mean(biou),
        mbiou_strict=_mean(strict),
        recall_curve=recall_curve_from_values(biou, cfg.recall_thresholds),
    )


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def recall_curve_from_values(biou_values: list[float], thresholds) -> dict[float, float]:
    n = len(biou_values)
    return {t: (sum(1 for v in biou_values if v > t) / n if n else 0.0) for t in thresholds}


def recall_curve(
    pairs: list[tuple[BinaryMask, BinaryMask]],
    thresholds=DEFAULT_RECALL_THRESHOLDS,
    ratio: float = 0.02,
) -> dict[float, float]:
    """Fraction of instances whose boundary IoU exceeds each threshold."""
    if list(thresholds) != sorted(thresholds):
        raise ValueError("thresholds must be sorted ascending")
    values = [boundary_iou(p, g, ratio) for p, g in pairs]
    return recall_curve_from_values(values, thresholds)


def format_table(reports: dict[str, EvalReport]) -> str:
    """Fixed-width comparison table, one row per prediction source."""
    name_w = max(12, *(len(k) for k in reports)) if reports else 12
    header = f"{'Model':<{name_w}}  {'mIoU':>7}  {'mBIoU':>7}  {'mBIoU*':>7}"
    rule = "-" * len(header)
    lines = [header, rule]
    for name, rep in reports.items():
        lines.append(
            f"{name:<{name_w}}  {100 * rep.miou:>7.1f}  {100 * rep.mbiou:>7.1f}  "
            f"{100 * rep.mbiou_strict:>7.1f}"
        )
    return "\n".join(lines)
