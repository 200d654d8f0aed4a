"""Adaptation-strategy comparison: what improves fine-structure quality
and what it costs in zero-shot behavior on a held-out family."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..metrics import MetricConfig
from ..model import SegModel
from ..numerics import Parameter, Tensor, trunc_normal
from ..synthdata.dataset import SceneDataset
from .evaluate import evaluate_dataset, zeroshot_boundary_ap
from .loop import TrainConfig, _train, stage1_sample_loss, stage2_sample_loss, train_hq

STRATEGIES = (
    "hq_token",
    "finetune_decoder",
    "finetune_output_token",
    "context_tokens",
    "full_finetune",
)


@dataclass
class StrategyResult:
    strategy: str
    fine_miou: float
    fine_mbiou: float
    zeroshot_ap_b: float
    zeroshot_ap_b_strict: float
    trainable_params: int

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "fine_miou": self.fine_miou,
            "fine_mbiou": self.fine_mbiou,
            "zeroshot_ap_b": self.zeroshot_ap_b,
            "zeroshot_ap_b_strict": self.zeroshot_ap_b_strict,
            "trainable_params": self.trainable_params,
        }


def _adaptation_cfg(epochs: int, seed: int, stage: str) -> TrainConfig:
    return TrainConfig(
        stage=stage,
        epochs=epochs,
        lr=1e-3,
        lr_drop_epoch=max(1, epochs - 1),
        batch_size=4,
        seed=seed,
        use_lsj=True,
    )


def _evaluate(
    model: SegModel,
    fine_val: SceneDataset,
    zeroshot: SceneDataset,
    branch: str,
    metric_cfg: MetricConfig,
    extra_rows: Tensor | None,
    trainable_params: int,
    strategy: str,
    max_scenes: int | None,
) -> StrategyResult:
    fine = evaluate_dataset(
        model, fine_val, branch=branch, metric_cfg=metric_cfg, extra_prompt_rows=extra_rows, max_scenes=max_scenes
    )
    ap = zeroshot_boundary_ap(
        model, zeroshot, branch="sam", metric_cfg=metric_cfg, extra_prompt_rows=extra_rows, max_scenes=max_scenes
    )
    return StrategyResult(
        strategy=strategy,
        fine_miou=fine.miou,
        fine_mbiou=fine.mbiou,
        zeroshot_ap_b=ap["ap"],
        zeroshot_ap_b_strict=ap["ap_strict"],
        trainable_params=trainable_params,
    )


def run_strategy(
    strategy: str,
    base_checkpoint: str | Path,
    fine_train: SceneDataset,
    fine_val: SceneDataset,
    zeroshot: SceneDataset,
    work_dir: str | Path,
    epochs: int = 3,
    seed: int = 0,
    metric_cfg: MetricConfig = MetricConfig(),
    hq_checkpoint: str | Path | None = None,
    max_eval_scenes: int | None = None,
) -> StrategyResult:
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    work_dir = Path(work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)
    model = SegModel.from_checkpoint(base_checkpoint)
    extra_rows: Tensor | None = None

    if strategy == "hq_token":
        if hq_checkpoint is not None:
            model.load_weights(hq_checkpoint)
            model.set_stage("hq")
        else:
            cfg = TrainConfig.hq(epochs=max(epochs, 2), lr_drop_epoch=max(1, epochs - 1), seed=seed)
            train_hq(model, fine_train, cfg, work_dir / "hq_token.ckpt")
        trainable = model.store.count(trainable_only=True)
        return _evaluate(
            model, fine_val, zeroshot, "corrected", metric_cfg, None, trainable, strategy, max_eval_scenes
        )

    extra_params: list[Parameter] = []
    if strategy == "full_finetune":
        model.set_stage("base")
    elif strategy == "finetune_decoder":
        model.store.set_trainable(lambda n: n.startswith("decoder."))
    elif strategy == "finetune_output_token":
        model.store.set_trainable(lambda n: n == "tokens.mask")
    elif strategy == "context_tokens":
        # three learnable prompt-side rows; no mask head of their own
        model.store.set_trainable(lambda n: False)
        rng = np.random.default_rng(seed)
        ctx = Parameter(
            "ablation.context_tokens",
            Tensor(trunc_normal(rng, (3, model.cfg.token_dim), std=0.02)),
            trainable=True,
        )
        extra_params.append(ctx)
        extra_rows = ctx.tensor

    def loss_fn(model_, image, prompts, gt_mask, cfg_):
        return stage1_sample_loss(
            model_, image, prompts, gt_mask, cfg_, extra_prompt_rows=extra_rows
        )

    _train(
        model,
        fine_train,
        _adaptation_cfg(epochs, seed, "base"),
        work_dir / f"{strategy}.ckpt",
        sample_loss=loss_fn,
        extra_params=extra_params,
    )
    trainable = model.store.count(trainable_only=True) + sum(p.tensor.size for p in extra_params)
    return _evaluate(
        model, fine_val, zeroshot, "sam", metric_cfg, extra_rows, trainable, strategy, max_eval_scenes
    )


def ablation_run(
    base_checkpoint: str | Path,
    fine_train: SceneDataset,
    fine_val: SceneDataset,
    zeroshot: SceneDataset,
    strategies: tuple[str, ...] = STRATEGIES,
    work_dir: str | Path = "ablation",
    epochs: int = 3,
    seed: int = 0,
    metric_cfg: MetricConfig = MetricConfig(),
    hq_checkpoint: str | Path | None = None,
    max_eval_scenes: int | None = None,
) -> dict:
    """Run the selected strategies and report fine-set quality next to
    zero-shot boundary AP on the held-out family."""
    base_model = SegModel.from_checkpoint(base_checkpoint)
    rows = {
        "base": _evaluate(
            base_model, fine_val, zeroshot, "sam", metric_cfg, None, 0, "base", max_eval_scenes
        ).to_dict()
    }
    for strategy in strategies:
        result = run_strategy(
            strategy,
            base_checkpoint,
            fine_train,
            fine_val,
            zeroshot,
            work_dir,
            epochs=epochs,
            seed=seed,
            metric_cfg=metric_cfg,
            hq_checkpoint=hq_checkpoint,
            max_eval_scenes=max_eval_scenes,
        )
        rows[strategy] = result.to_dict()
    return rows


def format_ablation_table(report: dict) -> str:
    header = f"{'Strategy':<24}  {'fine mIoU':>9}  {'fine mBIoU':>10}  {'0-shot APb':>10}  {'trainable':>10}"
    lines = [header, "-" * len(header)]
    for name, row in report.items():
        lines.append(
            f"{name:<24}  {100 * row['fine_miou']:>9.1f}  {100 * row['fine_mbiou']:>10.1f}  "
            f"{100 * row['zeroshot_ap_b']:>10.1f}  {row['trainable_params']:>10d}"
        )
    return "\n".join(lines)
