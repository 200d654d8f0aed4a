"""Command-line surface: data generation, training, evaluation, inference.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click
import numpy as np

from .masks import BinaryMask
from .metrics import MetricConfig, format_table
from .model import PromptSet, SegModel
from .promptgen import Box, LabeledPoint
from .synthdata import (
    SceneDataset,
    SceneSpec,
    coarsen_labels,
    decode_rle,
    encode_rle,
    generate_scene,
    write_dataset,
)
from .synthdata.scenes import FAMILIES, Scene


def _load_train_config(config_path: str | None, stage: str, overrides: dict) -> "TrainConfig":
    from .train import TrainConfig

    values: dict = {}
    if config_path:
        import tomli

        with open(config_path, "rb") as fh:
            doc = tomli.load(fh)
        values.update(doc.get("train", {}))
        if "prompt_mix" in values:
            values["prompt_mix"] = {k: float(v) for k, v in values["prompt_mix"].items()}
    values.update({k: v for k, v in overrides.items() if v is not None})
    values["stage"] = stage
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = set(values) - known
    if unknown:
        raise click.UsageError(f"unknown train config keys: {sorted(unknown)}")
    return TrainConfig(**values)


@click.group()
def cli():
    """Promptable segmentation: data, training, evaluation, service."""


@cli.command("gen-data")
@click.option("--out", required=True, type=click.Path())
@click.option("--scenes", default=100, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--families", default=",".join(FAMILIES), show_default=True)
@click.option("--instances", default="1,3", show_default=True, help="min,max instances per scene")
@click.option("--thin-width", default="1,3", show_default=True, help="min,max stroke width (px)")
@click.option("--texture", default="noise", show_default=True, type=click.Choice(["flat", "gradient", "noise"]))
@click.option("--coarsen", is_flag=True, help="replace labels with coarsened ones")
@click.option("--name", default="synthetic", show_default=True)
@click.option("--split", default="train", show_default=True, type=click.Choice(["train", "val", "test"]))
def gen_data(out, scenes, seed, families, instances, thin_width, texture, coarsen, name, split):
    """Generate a synthetic scene dataset."""
    fams = tuple(f.strip() for f in families.split(",") if f.strip())
    lo, hi = (int(v) for v in instances.split(","))
    tw_lo, tw_hi = (int(v) for v in thin_width.split(","))
    rng = np.random.default_rng(seed ^ 0x5EED)
    out_scenes: list[Scene] = []
    for i in range(scenes):
        spec = SceneSpec(
            seed=seed + i,
            families=fams,
            instances_per_scene=(lo, hi),
            thin_width=(tw_lo, tw_hi),
            texture=texture,
        )
        scene = generate_scene(spec)
        if coarsen:
            scene = Scene(image=scene.image, instances=coarsen_labels(scene.instances, rng))
        out_scenes.append(scene)
    manifest = write_dataset(out, name, split, out_scenes)
    n_inst = sum(len(i.masks) for i in manifest.items)
    click.echo(f"wrote {len(manifest.items)} scenes / {n_inst} instances to {out}")


@cli.command()
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True), help="TOML run config")
@click.option("--epochs", type=int)
@click.option("--lr", type=float)
@click.option("--lr-drop-epoch", "lr_drop_epoch", type=int)
@click.option("--batch-size", "batch_size", type=int)
@click.option("--seed", type=int)
@click.option("--model-seed", default=0, show_default=True, type=int)
@click.option("--log", "log_path", type=click.Path())
def pretrain(data, out, config_path, epochs, lr, lr_drop_epoch, batch_size, seed, model_seed, log_path):
    """Stage 1: pretrain the base model on (coarsened) labels."""
    from .train import pretrain_base

    cfg = _load_train_config(
        config_path,
        "base",
        {"epochs": epochs, "lr": lr, "lr_drop_epoch": lr_drop_epoch, "batch_size": batch_size, "seed": seed},
    )
    model = SegModel(seed=model_seed)
    result = pretrain_base(model, SceneDataset(data), cfg, out, log_path)
    status = "DIVERGED (restored last good weights)" if result.diverged else "ok"
    click.echo(f"pretrain {status}: {result.steps} steps, checkpoint {result.checkpoint}")


@cli.command("train-hq")
@click.option("--base", "base_ckpt", required=True, type=click.Path(exists=True))
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True), help="TOML run config")
@click.option("--epochs", type=int)
@click.option("--lr", type=float)
@click.option("--lr-drop-epoch", "lr_drop_epoch", type=int)
@click.option("--batch-size", "batch_size", type=int)
@click.option("--seed", type=int)
@click.option("--log", "log_path", type=click.Path())
def train_hq_cmd(base_ckpt, data, out, config_path, epochs, lr, lr_drop_epoch, batch_size, seed, log_path):
    """Stage 2: train only the HQ additions with the base frozen."""
    from .train import train_hq

    cfg = _load_train_config(
        config_path,
        "hq",
        {"epochs": epochs, "lr": lr, "lr_drop_epoch": lr_drop_epoch, "batch_size": batch_size, "seed": seed},
    )
    model = SegModel.from_checkpoint(base_ckpt)
    result = train_hq(model, SceneDataset(data), cfg, out, log_path)
    click.echo(
        f"train-hq ok: {result.steps} steps, freeze violations: {len(result.freeze_violations)}, "
        f"checkpoint {result.checkpoint}"
    )


@cli.command("eval")
@click.option("--ckpt", required=True, type=click.Path(exists=True))
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--ratio", default=0.02, show_default=True, type=float)
@click.option("--strict", "strict_ratio", default=0.01, show_default=True, type=float)
@click.option("--branches", default="sam,corrected", show_default=True)
@click.option("--noise-scale", default=0.0, show_default=True, type=float)
@click.option("--max-scenes", type=int)
@click.option("--json", "json_path", type=click.Path())
def eval_cmd(ckpt, data, ratio, strict_ratio, branches, noise_scale, max_scenes, json_path):
    """GT-box-prompted evaluation; prints the comparison table."""
    from .train import evaluate_branches

    model = SegModel.from_checkpoint(ckpt)
    cfg = MetricConfig(dilation_ratio=ratio, strict_ratio=strict_ratio)
    reports = evaluate_branches(
        model,
        SceneDataset(data),
        branches=tuple(b.strip() for b in branches.split(",")),
        metric_cfg=cfg,
        noise_scale=noise_scale,
        max_scenes=max_scenes,
    )
    click.echo(format_table(reports))
    if json_path:
        payload = {name: rep.to_dict() for name, rep in reports.items()}
        Path(json_path).write_text(json.dumps(payload, indent=2), encoding="utf-8")
        click.echo(f"report written to {json_path}")


@cli.command()
@click.option("--base", "base_ckpt", required=True, type=click.Path(exists=True))
@click.option("--fine-train", required=True, type=click.Path(exists=True))
@click.option("--fine-val", required=True, type=click.Path(exists=True))
@click.option("--zeroshot", required=True, type=click.Path(exists=True))
@click.option("--strategies", default=",".join(("hq_token", "full_finetune")), show_default=True)
@click.option("--epochs", default=3, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--hq-ckpt", type=click.Path(exists=True), help="reuse an already-trained HQ checkpoint")
@click.option("--work-dir", default="ablation", show_default=True, type=click.Path())
@click.option("--json", "json_path", type=click.Path())
@click.option("--max-eval-scenes", type=int)
def ablate(base_ckpt, fine_train, fine_val, zeroshot, strategies, epochs, seed, hq_ckpt, work_dir, json_path, max_eval_scenes):
    """Compare adaptation strategies (fine quality vs zero-shot cost)."""
    from .train import STRATEGIES, ablation_run, format_ablation_table

    wanted = tuple(s.strip() for s in strategies.split(","))
    unknown = set(wanted) - set(STRATEGIES)
    if unknown:
        raise click.UsageError(f"unknown strategies: {sorted(unknown)}")
    report = ablation_run(
        base_ckpt,
        SceneDataset(fine_train),
        SceneDataset(fine_val),
        SceneDataset(zeroshot),
        strategies=wanted,
        work_dir=work_dir,
        epochs=epochs,
        seed=seed,
        hq_checkpoint=hq_ckpt,
        max_eval_scenes=max_eval_scenes,
    )
    click.echo(format_ablation_table(report))
    if json_path:
        Path(json_path).write_text(json.dumps(report, indent=2), encoding="utf-8")
        click.echo(f"report written to {json_path}")


def _parse_prompts(box: str | None, points: tuple[str, ...], coarse_rle: str | None) -> PromptSet:
    parsed_points = []
    for spec in points:
        parts = spec.split(",")
        if len(parts) != 3 or parts[2] not in ("pos", "neg", "positive", "negative"):
            raise click.UsageError(f"bad --point {spec!r}; expected x,y,pos|neg")
        label = "positive" if parts[2].startswith("pos") else "negative"
        parsed_points.append(LabeledPoint(float(parts[0]), float(parts[1]), label))
    parsed_box = None
    if box:
        vals = [float(v) for v in box.split(",")]
        if len(vals) != 4:
            raise click.UsageError("--box expects x0,y0,x1,y1")
        parsed_box = Box(*vals)
    coarse = None
    if coarse_rle:
        coarse = decode_rle(Path(coarse_rle).read_text(encoding="utf-8"))
    return PromptSet(points=parsed_points, box=parsed_box, coarse_mask=coarse)


@cli.command()
@click.option("--ckpt", type=click.Path(exists=True), help="checkpoint (local mode)")
@click.option("--image", "image_path", type=click.Path(exists=True), help="PNG file")
@click.option("--image-id", help="dataset image id (requires --data or --server)")
@click.option("--data", type=click.Path(exists=True), help="dataset dir for --image-id")
@click.option("--box", help="x0,y0,x1,y1")
@click.option("--point", "points", multiple=True, help="x,y,pos|neg (repeatable)")
@click.option("--coarse-rle", type=click.Path(exists=True), help="file with an RLE coarse mask")
@click.option("--branch", default="corrected", show_default=True, type=click.Choice(["sam", "hq", "corrected"]))
@click.option("--server", help="base URL of a running service (thin-client mode)")
def segment(ckpt, image_path, image_id, data, box, points, coarse_rle, branch, server):
    """Segment one image; prints the mask RLE on stdout."""
    prompts = _parse_prompts(box, points, coarse_rle)

    if server:
        import base64

        import requests

        body: dict = {"prompts": {}, "return": [branch]}
        if points:
            body["prompts"]["points"] = [
                {"x": p.x, "y": p.y, "label": p.label} for p in prompts.points
            ]
        if prompts.box is not None:
            body["prompts"]["box"] = list(prompts.box)
        if prompts.coarse_mask is not None:
            body["prompts"]["coarse_mask_rle"] = encode_rle(prompts.coarse_mask)
        if image_id:
            body["image_id"] = image_id
        elif image_path:
            body["image_png_b64"] = base64.b64encode(Path(image_path).read_bytes()).decode("ascii")
        else:
            raise click.UsageError("provide --image or --image-id")
        resp = requests.post(f"{server.rstrip('/')}/segment", json=body, timeout=60)
        if resp.status_code != 200:
            raise RuntimeError(f"server returned {resp.status_code}: {resp.text[:300]}")
        sys.stdout.write(resp.json()["masks"][branch])
        return

    if not ckpt:
        raise click.UsageError("--ckpt is required in local mode")
    model = SegModel.from_checkpoint(ckpt)
    if image_id:
        if not data:
            raise click.UsageError("--image-id needs --data")
        ds = SceneDataset(data)
        ids = {Path(item.image).stem: i for i, item in enumerate(ds.manifest.items)}
        if image_id not in ids:
            raise RuntimeError(f"unknown image id {image_id!r}")
        img = ds[ids[image_id]].image
    elif image_path:
        from .synthdata.dataset import png_to_image

        img = png_to_image(Path(image_path))
    else:
        raise click.UsageError("provide --image or --image-id")
    pred = model.predict(img, prompts)
    sys.stdout.write(encode_rle(pred.branch_mask(branch, model.cfg.image_size)))


@cli.command()
@click.option("--ckpt", required=True, type=click.Path(exists=True))
@click.option("--data", type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(ckpt, data, host, port):
    """Run the HTTP inference service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(ckpt, data), host=host, port=port, log_level="info")


@cli.command("grad-check")
@click.option("--eps", default=1e-5, show_default=True, type=float)
@click.option("--tol", default=1e-4, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
def grad_check_cmd(eps, tol, seed):
    """Finite-difference verification of every op and the HQ loss."""
    from .train import run_gradient_suite

    ok, text = run_gradient_suite(eps=eps, tol=tol, seed=seed)
    click.echo(text)
    if not ok:
        raise RuntimeError("gradient suite failed")


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.Abort:
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
