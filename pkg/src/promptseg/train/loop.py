"""Two-stage training: base pretraining and frozen-base HQ adaptation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import numerics as N
from ..imaging import nearest_resize
from ..masks import BinaryMask
from ..model import SegModel, is_hq_parameter
from ..model.prompts import PromptSet
from ..numerics import NonFiniteError, ParamStore, Tensor
from ..promptgen import NoiseSpec, box_from_mask, degrade_mask, large_scale_jitter, sample_points
from ..synthdata.dataset import SceneDataset
from ..synthdata.scenes import Scene
from .loss import (
    actual_head_ious,
    bce_dice_loss,
    bce_dice_with_parts,
    iou_regression_loss,
    upsample_logits,
)
from .optim import Adam

PROMPT_KINDS = ("box", "points", "coarse")


@dataclass(frozen=True)
class TrainConfig:
    stage: str  # "base" | "hq"
    epochs: int = 12
    lr: float = 1e-3
    lr_drop_epoch: int = 10
    lr_drop_factor: float = 0.1
    batch_size: int = 4
    seed: int = 0
    prompt_mix: dict[str, float] = field(
        default_factory=lambda: {"box": 1 / 3, "points": 1 / 3, "coarse": 1 / 3}
    )
    bce_weight: float = 1.0
    dice_weight: float = 1.0
    # "corrected": supervise base-selected + refinement logits (residual
    # learning); "hq_only": supervise the refinement map directly
    hq_supervision: str = "corrected"
    use_lsj: bool = True
    iou_loss_weight: float = 1.0

    def __post_init__(self):
        if self.stage not in ("base", "hq"):
            raise ValueError(f"unknown stage {self.stage!r}")
        if not self.lr_drop_epoch < self.epochs:
            raise ValueError("lr_drop_epoch must be < epochs")
        if self.bce_weight < 0 or self.dice_weight < 0:
            raise ValueError("loss weights must be >= 0")
        if self.bce_weight == 0 and self.dice_weight == 0:
            raise ValueError("loss weights must not both be zero")
        if self.hq_supervision not in ("corrected", "hq_only"):
            raise ValueError(f"unknown hq_supervision {self.hq_supervision!r}")
        if abs(sum(self.prompt_mix.values()) - 1.0) > 1e-9:
            raise ValueError("prompt_mix must sum to 1")
        if set(self.prompt_mix) - set(PROMPT_KINDS):
            raise ValueError(f"prompt kinds must be among {PROMPT_KINDS}")

    @classmethod
    def base(cls, **kw) -> "TrainConfig":
        kw.setdefault("use_lsj", False)
        return cls(stage="base", **kw)

    @classmethod
    def hq(cls, **kw) -> "TrainConfig":
        kw.setdefault("use_lsj", True)
        return cls(stage="hq", **kw)


@dataclass
class FreezeManifest:
    """Trainable flag + content checksum for every parameter, taken
    before training; frozen entries must verify unchanged after."""

    entries: dict[str, tuple[bool, str]]

    @classmethod
    def capture(cls, store: ParamStore) -> "FreezeManifest":
        return cls({p.name: (p.trainable, p.checksum()) for p in store})


def verify_freeze(manifest: FreezeManifest, store: ParamStore) -> list[str]:
    """Names of frozen parameters whose bytes changed (empty == ok)."""
    if set(manifest.entries) != {p.name for p in store}:
        raise ValueError("freeze manifest does not cover the same parameter set")
    violated = []
    for p in store:
        trainable, checksum = manifest.entries[p.name]
        if not trainable and p.checksum() != checksum:
            violated.append(p.name)
    return violated


class PromptSampler:
    """Draws one training prompt of a mixed kind from a ground-truth mask."""

    def __init__(self, cfg: TrainConfig, image_size: int):
        self.cfg = cfg
        self.image_size = image_size
        self.kinds = sorted(cfg.prompt_mix)
        self.weights = np.array([cfg.prompt_mix[k] for k in self.kinds])
        self.noise = NoiseSpec(mask_noise_sigma=1.0, band_ratio=0.02)

    def sample(self, mask: BinaryMask, rng: np.random.Generator) -> tuple[PromptSet, str]:
        kind = self.kinds[int(rng.choice(len(self.kinds), p=self.weights))]
        if kind == "box":
            return PromptSet(box=box_from_mask(mask)), kind
        if kind == "points":
            n_pos = min(int(rng.integers(1, 11)), mask.area())
            n_neg = min(int(rng.integers(0, 6)), mask.width * mask.height - mask.area())
            return PromptSet(points=sample_points(mask, max(1, n_pos), n_neg, rng)), kind
        coarse = degrade_mask(mask, self.noise, rng)
        if coarse.is_empty():  # degenerate degradation: fall back to the box
            return PromptSet(box=box_from_mask(mask)), "box"
        return PromptSet(coarse_mask=coarse), kind


def _gt_at_mask_res(mask: BinaryMask, mask_side: int) -> np.ndarray:
    return nearest_resize(mask.a.astype(np.float64), mask_side, mask_side) > 0.5


def _select_head(prompts: PromptSet, iou_scores: np.ndarray) -> int:
    return 0 if prompts.box is not None else int(np.argmax(iou_scores))


def stage1_sample_loss(
    model: SegModel,
    scene_image: np.ndarray,
    prompts: PromptSet,
    gt_mask: BinaryMask,
    cfg: TrainConfig,
    extra_prompt_rows: Tensor | None = None,
):
    """Base supervision: best-of-4 mask loss plus IoU-head regression,
    against the label at mask resolution."""
    gt_small = _gt_at_mask_res(gt_mask, model.cfg.mask_side)
    sam_logits, iou_pred, _, _, _ = model.forward(
        scene_image, prompts, with_hq=False, extra_prompt_rows=extra_prompt_rows
    )
    per_head = [
        bce_dice_with_parts(sam_logits[j], gt_small, cfg.bce_weight, cfg.dice_weight)
        for j in range(sam_logits.shape[0])
    ]
    best = int(np.argmin([float(l.data) for l, _ in per_head]))
    actual = actual_head_ious(sam_logits.data, gt_small)
    iou_loss = iou_regression_loss(iou_pred, actual)
    total = per_head[best][0] + N.mul(iou_loss, cfg.iou_loss_weight)
    return total, {**per_head[best][1], "iou_l2": float(iou_loss.data)}


def stage2_sample_loss(model: SegModel, scene_image: np.ndarray, prompts: PromptSet, gt_mask: BinaryMask, cfg: TrainConfig):
    """HQ supervision on the corrected (or raw refinement) logits.

    Supervised at image resolution through a differentiable bilinear
    upsample: the fine-structure targets carry sub-mask-cell boundary
    positions that a mask-resolution binary target cannot express.
    """
    gt_full = gt_mask.a
    sam_logits, iou_pred, hq_logits, _, _ = model.forward(scene_image, prompts, with_hq=True)
    if cfg.hq_supervision == "corrected":
        sel = _select_head(prompts, iou_pred.data)
        target_logits = sam_logits[sel] + hq_logits[0]
    else:
        target_logits = hq_logits[0]
    upsampled = upsample_logits(target_logits, gt_full.shape[-1])
    loss, parts = bce_dice_with_parts(upsampled, gt_full, cfg.bce_weight, cfg.dice_weight)
    return loss, parts


@dataclass
class TrainResult:
    checkpoint: Path
    epoch_losses: list[float]
    steps: int
    diverged: bool
    freeze_violations: list[str]


class _JsonlLogger:
    def __init__(self, path: str | Path | None):
        self.fh = open(path, "w", encoding="utf-8") if path else None

    def log(self, record: dict) -> None:
        if self.fh:
            self.fh.write(json.dumps(record) + "\n")
            self.fh.flush()

    def close(self) -> None:
        if self.fh:
            self.fh.close()


def _train(
    model: SegModel,
    dataset: SceneDataset,
    cfg: TrainConfig,
    checkpoint_path: str | Path,
    log_path: str | Path | None = None,
    sample_loss=None,
    extra_params: list | None = None,
    log_every: int = 200,
) -> TrainResult:
    rng = np.random.default_rng(cfg.seed)
    sampler = PromptSampler(cfg, model.cfg.image_size)
    checkpoint_path = Path(checkpoint_path)
    trainable = model.store.trainable() + list(extra_params or [])
    if not trainable:
        raise ValueError("nothing to train")
    opt = Adam(trainable, lr=cfg.lr)
    logger = _JsonlLogger(log_path)

    epoch_losses: list[float] = []
    snapshot = model.store.snapshot()
    diverged = False
    step = 0
    try:
        for epoch in range(cfg.epochs):
            lr = cfg.lr * (cfg.lr_drop_factor if epoch >= cfg.lr_drop_epoch else 1.0)
            opt.lr = lr
            order = rng.permutation(len(dataset))
            running: list[float] = []
            batch_count = 0
            try:
                for scene_idx in order:
                    scene = dataset[int(scene_idx)]
                    image, mask = _pick_instance(scene, rng, cfg)
                    prompts, _kind = sampler.sample(mask, rng)
                    loss, parts = sample_loss(model, image, prompts, mask, cfg)
                    loss.backward()
                    running.append(float(loss.data))
                    batch_count += 1
                    step += 1
                    if batch_count == cfg.batch_size:
                        opt.step(grad_scale=1.0 / batch_count)
                        opt.zero_grad()
                        batch_count = 0
                    if step % log_every == 0:
                        logger.log(
                            {
                                "stage": cfg.stage,
                                "epoch": epoch,
                                "step": step,
                                "loss": float(np.mean(running[-log_every:])),
                                "lr": lr,
                                **parts,
                            }
                        )
                if batch_count:
                    opt.step(grad_scale=1.0 / batch_count)
                    opt.zero_grad()
            except NonFiniteError as exc:
                # divergence: restore the last epoch-end weights and stop
                model.store.restore(snapshot)
                diverged = True
                logger.log({"stage": cfg.stage, "epoch": epoch, "step": step, "error": str(exc)})
                break
            epoch_mean = float(np.mean(running)) if running else math.nan
            epoch_losses.append(epoch_mean)
            logger.log({"stage": cfg.stage, "epoch": epoch, "epoch_mean_loss": epoch_mean, "lr": lr})
            snapshot = model.store.snapshot()
    finally:
        logger.close()

    model.save(checkpoint_path, extra={"stage": cfg.stage, "diverged": diverged})
    return TrainResult(
        checkpoint=checkpoint_path,
        epoch_losses=epoch_losses,
        steps=step,
        diverged=diverged,
        freeze_violations=[],
    )


def _pick_instance(scene: Scene, rng: np.random.Generator, cfg: TrainConfig):
    idx = int(rng.integers(len(scene.instances)))
    mask = scene.instances[idx].mask
    image = scene.image
    if cfg.use_lsj:
        image, (mask,) = large_scale_jitter(image, [mask], rng)
    return image, mask


def pretrain_base(
    model: SegModel,
    dataset: SceneDataset,
    cfg: TrainConfig,
    checkpoint_path: str | Path,
    log_path: str | Path | None = None,
) -> TrainResult:
    """Stage 1: train everything except the HQ additions on coarse labels."""
    if cfg.stage != "base":
        raise ValueError("pretrain_base needs a stage='base' config")
    model.set_stage("base")
    return _train(model, dataset, cfg, checkpoint_path, log_path, sample_loss=stage1_sample_loss)


def train_hq(
    model: SegModel,
    dataset: SceneDataset,
    cfg: TrainConfig,
    checkpoint_path: str | Path,
    log_path: str | Path | None = None,
) -> TrainResult:
    """Stage 2: freeze the base, train only the HQ additions on fine labels.

    Builds a freeze manifest first and hard-fails if any frozen
    parameter's checksum moves during the run.
    """
    if cfg.stage != "hq":
        raise ValueError("train_hq needs a stage='hq' config")
    model.set_stage("hq")
    trainable_names = {p.name for p in model.store.trainable()}
    expected = {p.name for p in model.store if is_hq_parameter(p.name)}
    if trainable_names != expected:
        raise ValueError(f"trainable set {sorted(trainable_names)} != HQ additions {sorted(expected)}")
    manifest = FreezeManifest.capture(model.store)
    result = _train(model, dataset, cfg, checkpoint_path, log_path, sample_loss=stage2_sample_loss)
    violations = verify_freeze(manifest, model.store)
    result.freeze_violations = violations
    if violations:
        raise RuntimeError(f"frozen parameters changed during HQ training: {violations}")
    return result
