"""Training: two-stage recipe, losses, freeze verification, ablations."""

from .ablation import STRATEGIES, ablation_run, format_ablation_table, run_strategy
from .evaluate import (
    collect_detections,
    evaluate_branches,
    evaluate_dataset,
    zeroshot_boundary_ap,
)
from .gradsuite import TINY_CONFIG, hq_loss_report, op_reports, run_gradient_suite
from .loop import (
    FreezeManifest,
    PromptSampler,
    TrainConfig,
    TrainResult,
    pretrain_base,
    train_hq,
    verify_freeze,
)
from .loss import (
    actual_head_ious,
    bce_dice_loss,
    bce_dice_with_parts,
    iou_regression_loss,
    upsample_logits,
)
from .optim import Adam

__all__ = [
    "TrainConfig",
    "TrainResult",
    "FreezeManifest",
    "verify_freeze",
    "PromptSampler",
    "pretrain_base",
    "train_hq",
    "Adam",
    "bce_dice_loss",
    "bce_dice_with_parts",
    "iou_regression_loss",
    "upsample_logits",
    "actual_head_ious",
    "evaluate_dataset",
    "evaluate_branches",
    "collect_detections",
    "zeroshot_boundary_ap",
    "ablation_run",
    "run_strategy",
    "format_ablation_table",
    "STRATEGIES",
    "run_gradient_suite",
    "op_reports",
    "hq_loss_report",
    "TINY_CONFIG",
]
