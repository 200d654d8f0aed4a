"""HTTP inference service.

Endpoints: GET /health, GET /images, GET /image/{id}, POST /segment.
Weights are loaded once and never mutated, so concurrent requests are
safe; every response is a pure function of (checkpoint, request) apart
from latency_ms.  All responses carry "v": 1.
"""

from __future__ import annotations

import base64
import binascii
import io
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from PIL import Image

from ..masks import BinaryMask
from ..metrics import boundary_iou, mask_iou
from ..model import PromptError, PromptSet, SegModel
from ..promptgen import Box, LabeledPoint
from ..synthdata.dataset import SceneDataset
from ..synthdata.rle import RleError, decode_rle, encode_rle
from .schemas import SegmentRequest

MAX_PNG_BYTES = 1 << 20  # inline payload cap


def _error(status: int, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail=message)


def _decode_inline_png(b64_payload: str, image_size: int) -> np.ndarray:
    try:
        raw = base64.b64decode(b64_payload, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise _error(400, f"invalid base64 image payload: {exc}")
    if len(raw) > MAX_PNG_BYTES:
        raise _error(413, f"inline PNG exceeds {MAX_PNG_BYTES} bytes")
    try:
        with Image.open(io.BytesIO(raw)) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except Exception as exc:
        raise _error(400, f"cannot decode PNG: {exc}")
    if arr.shape[:2] != (image_size, image_size):
        raise _error(422, f"image must be {image_size}x{image_size}, got {arr.shape[1]}x{arr.shape[0]}")
    return arr.transpose(2, 0, 1)


def create_app(checkpoint: str | Path, dataset_dir: str | Path | None = None) -> FastAPI:
    model = SegModel.from_checkpoint(checkpoint)
    dataset = SceneDataset(dataset_dir) if dataset_dir else None
    image_ids: dict[str, int] = {}
    if dataset is not None:
        image_ids = {Path(item.image).stem: i for i, item in enumerate(dataset.manifest.items)}

    app = FastAPI(title="promptseg inference service")

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        # strict schema: malformed bodies and unknown fields are a 400
        return JSONResponse(status_code=400, content={"v": 1, "error": str(exc.errors()[:3])})

    @app.get("/health")
    def health() -> dict:
        return {"ok": True, "v": 1, "model_config": model.cfg.to_dict()}

    @app.get("/images")
    def images() -> dict:
        return {"v": 1, "images": sorted(image_ids)}

    @app.get("/image/{image_id}")
    def image(image_id: str) -> Response:
        if dataset is None or image_id not in image_ids:
            raise _error(404, f"unknown image id {image_id!r}")
        item = dataset.manifest.items[image_ids[image_id]]
        data = (dataset.directory / item.image).read_bytes()
        return Response(content=data, media_type="image/png")

    @app.post("/segment")
    def segment(req: SegmentRequest) -> JSONResponse:
        t0 = time.perf_counter()
        size = model.cfg.image_size

        sources = [s for s in (req.image_id, req.image_png_b64) if s is not None]
        if len(sources) != 1:
            raise _error(400, "exactly one of image_id / image_png_b64 is required")
        scene = None
        if req.image_id is not None:
            if dataset is None or req.image_id not in image_ids:
                raise _error(404, f"unknown image id {req.image_id!r}")
            scene = dataset[image_ids[req.image_id]]
            img = scene.image
        else:
            img = _decode_inline_png(req.image_png_b64, size)

        points = [LabeledPoint(p.x, p.y, p.label) for p in req.prompts.points]
        box = Box(*req.prompts.box) if req.prompts.box is not None else None
        coarse = None
        if req.prompts.coarse_mask_rle is not None:
            try:
                coarse = decode_rle(req.prompts.coarse_mask_rle)
            except RleError as exc:
                raise _error(422, f"bad coarse mask RLE: {exc}")
        prompts = PromptSet(points=points, box=box, coarse_mask=coarse)
        try:
            prompts.validate(size)
        except PromptError as exc:
            raise _error(422, str(exc))

        pred = model.predict(img, prompts)
        masks: dict[str, str] = {}
        areas: dict[str, int] = {}
        branch_masks: dict[str, BinaryMask] = {}
        for branch in req.return_branches:
            bm = pred.branch_mask(branch, size)
            branch_masks[branch] = bm
            masks[branch] = encode_rle(bm)
            areas[branch] = bm.area()

        biou_vs_gt = None
        if scene is not None and scene.instances:
            ref = branch_masks.get("corrected") or pred.branch_mask("corrected", size)
            best = max(scene.instances, key=lambda inst: mask_iou(ref, inst.mask))
            biou_vs_gt = boundary_iou(ref, best.mask, 0.02)

        payload = {
            "v": 1,
            "masks": masks,
            "areas": areas,
            "iou_scores": [float(s) for s in pred.iou_scores],
            "selected": pred.selected,
            "biou_vs_gt": biou_vs_gt,
            "latency_ms": (time.perf_counter() - t0) * 1e3,
        }
        return JSONResponse(content=payload)

    return app
