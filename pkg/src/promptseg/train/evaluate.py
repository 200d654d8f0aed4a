"""Evaluation protocols: box-prompted dataset sweeps and detection collection."""

from __future__ import annotations

import numpy as np

from ..masks import BinaryMask
from ..metrics import Detection, EvalReport, MetricConfig, aggregate, boundary_ap
from ..model import SegModel
from ..model.prompts import PromptSet
from ..numerics import Tensor
from ..promptgen import box_from_mask, noise_box
from ..synthdata.dataset import SceneDataset


def evaluate_dataset(
    model: SegModel,
    dataset: SceneDataset,
    branch: str = "corrected",
    metric_cfg: MetricConfig = MetricConfig(),
    noise_scale: float = 0.0,
    seed: int = 0,
    extra_prompt_rows: Tensor | None = None,
    max_scenes: int | None = None,
) -> EvalReport:
    """GT-box-prompted evaluation of one output branch over a dataset."""
    pairs = _branch_pairs(model, dataset, [branch], noise_scale, seed, extra_prompt_rows, max_scenes)[branch]
    return aggregate(pairs, metric_cfg)


def evaluate_branches(
    model: SegModel,
    dataset: SceneDataset,
    branches: tuple[str, ...] = ("sam", "corrected"),
    metric_cfg: MetricConfig = MetricConfig(),
    noise_scale: float = 0.0,
    seed: int = 0,
    max_scenes: int | None = None,
) -> dict[str, EvalReport]:
    """One forward pass per instance, reported per branch."""
    by_branch = _branch_pairs(model, dataset, list(branches), noise_scale, seed, None, max_scenes)
    return {b: aggregate(pairs, metric_cfg) for b, pairs in by_branch.items()}


def _branch_pairs(
    model: SegModel,
    dataset: SceneDataset,
    branches: list[str],
    noise_scale: float,
    seed: int,
    extra_prompt_rows: Tensor | None,
    max_scenes: int | None,
) -> dict[str, list[tuple[BinaryMask, BinaryMask]]]:
    rng = np.random.default_rng(seed)
    size = model.cfg.image_size
    out: dict[str, list[tuple[BinaryMask, BinaryMask]]] = {b: [] for b in branches}
    n = len(dataset) if max_scenes is None else min(len(dataset), max_scenes)
    for i in range(n):
        scene = dataset[i]
        for inst in scene.instances:
            box = box_from_mask(inst.mask)
            if noise_scale > 0:
                box = noise_box(box, noise_scale, rng, (size, size))
            pred = model.predict(scene.image, PromptSet(box=box), extra_prompt_rows=extra_prompt_rows)
            for b in branches:
                out[b].append((pred.branch_mask(b, size), inst.mask))
    return out


def collect_detections(
    model: SegModel,
    dataset: SceneDataset,
    branch: str = "sam",
    seed: int = 0,
    extra_prompt_rows: Tensor | None = None,
    max_scenes: int | None = None,
) -> tuple[list[Detection], dict[str, list[BinaryMask]]]:
    """One GT-box-prompted detection per instance, scored by predicted IoU."""
    size = model.cfg.image_size
    preds: list[Detection] = []
    gts: dict[str, list[BinaryMask]] = {}
    n = len(dataset) if max_scenes is None else min(len(dataset), max_scenes)
    for i in range(n):
        scene = dataset[i]
        image_id = f"scene_{i:05d}"
        gts[image_id] = [inst.mask for inst in scene.instances]
        for inst in scene.instances:
            pred = model.predict(
                scene.image, PromptSet(box=box_from_mask(inst.mask)), extra_prompt_rows=extra_prompt_rows
            )
            score = float(pred.iou_scores[pred.selected])
            preds.append(Detection(pred.branch_mask(branch, size), score, image_id))
    return preds, gts


def zeroshot_boundary_ap(
    model: SegModel,
    dataset: SceneDataset,
    branch: str = "sam",
    metric_cfg: MetricConfig = MetricConfig(),
    extra_prompt_rows: Tensor | None = None,
    max_scenes: int | None = None,
) -> dict:
    preds, gts = collect_detections(
        model, dataset, branch=branch, extra_prompt_rows=extra_prompt_rows, max_scenes=max_scenes
    )
    return boundary_ap(preds, gts, metric_cfg)
