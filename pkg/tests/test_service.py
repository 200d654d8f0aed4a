import base64
import io

import numpy as np
import pytest
from fastapi.testclient import TestClient

from promptseg.model import SegModel
from promptseg.service import create_app
from promptseg.synthdata import SceneDataset, SceneSpec, decode_rle, encode_rle, generate_scene, write_dataset

from .test_model import SMALL


@pytest.fixture(scope="module")
def served(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    scenes = [
        generate_scene(SceneSpec(seed=70 + i, instances_per_scene=(1, 2), size=SMALL.image_size))
        for i in range(4)
    ]
    data_dir = root / "data"
    write_dataset(data_dir, "svc", "val", scenes)
    model = SegModel(SMALL, seed=0)
    ckpt = root / "model.ckpt"
    model.save(ckpt)
    app = create_app(ckpt, data_dir)
    return TestClient(app), model, SceneDataset(data_dir), ckpt


def _box_request(image_id, branches=("sam", "hq", "corrected")):
    return {
        "image_id": image_id,
        "prompts": {"box": [6, 6, 50, 50]},
        "return": list(branches),
    }


class TestEndpoints:
    def test_health_reports_config(self, served):
        client, model, *_ = served
        r = client.get("/health")
        assert r.status_code == 200
        body = r.json()
        assert body["ok"] is True and body["v"] == 1
        assert body["model_config"]["image_size"] == SMALL.image_size

    def test_images_listing_and_png(self, served):
        client, *_ = served
        ids = client.get("/images").json()["images"]
        assert ids == sorted(ids) and len(ids) == 4
        r = client.get(f"/image/{ids[0]}")
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        assert r.content[:8] == b"\x89PNG\r\n\x1a\n"
        assert client.get("/image/nope").status_code == 404

    def test_segment_returns_requested_branches(self, served):
        client, model, ds, _ = served
        ids = client.get("/images").json()["images"]
        r = client.post("/segment", json=_box_request(ids[0]))
        assert r.status_code == 200
        body = r.json()
        assert body["v"] == 1
        assert sorted(body["masks"]) == ["corrected", "hq", "sam"]
        assert len(body["iou_scores"]) == 4
        assert body["selected"] == 0  # box prompt pins the single-mask head
        for branch, rle in body["masks"].items():
            mask = decode_rle(rle)
            assert mask.width * mask.height == SMALL.image_size**2
            assert mask.area() == body["areas"][branch]
        assert body["biou_vs_gt"] is not None
        assert body["latency_ms"] > 0

    def test_zero_trained_hq_corrected_equals_sam(self, served):
        client, *_ = served
        ids = client.get("/images").json()["images"]
        body = client.post("/segment", json=_box_request(ids[1])).json()
        assert body["masks"]["corrected"] == body["masks"]["sam"]

    def test_deterministic_modulo_latency(self, served):
        client, *_ = served
        ids = client.get("/images").json()["images"]
        req = _box_request(ids[0])
        a, b = client.post("/segment", json=req).json(), client.post("/segment", json=req).json()
        a.pop("latency_ms"), b.pop("latency_ms")
        assert a == b

    def test_inline_png_source(self, served):
        client, model, ds, _ = served
        raw = (np.ones((SMALL.image_size, SMALL.image_size, 3)) * 128).astype(np.uint8)
        from PIL import Image

        buf = io.BytesIO()
        Image.fromarray(raw).save(buf, format="PNG")
        req = {
            "image_png_b64": base64.b64encode(buf.getvalue()).decode("ascii"),
            "prompts": {"points": [{"x": 10, "y": 12, "label": "positive"}]},
            "return": ["corrected"],
        }
        r = client.post("/segment", json=req)
        assert r.status_code == 200


class TestErrors:
    def test_unknown_field_is_400(self, served):
        client, *_ = served
        ids = client.get("/images").json()["images"]
        r = client.post("/segment", json={**_box_request(ids[0]), "surprise": 1})
        assert r.status_code == 400

    def test_malformed_body_is_400(self, served):
        client, *_ = served
        r = client.post("/segment", content=b"{not json", headers={"content-type": "application/json"})
        assert r.status_code == 400

    def test_unknown_image_is_404(self, served):
        client, *_ = served
        assert client.post("/segment", json=_box_request("missing")).status_code == 404

    def test_invalid_geometry_is_422(self, served):
        client, *_ = served
        ids = client.get("/images").json()["images"]
        bad = {"image_id": ids[0], "prompts": {"box": [50, 50, 6, 6]}}
        assert client.post("/segment", json=bad).status_code == 422
        bad_rle = {"image_id": ids[0], "prompts": {"coarse_mask_rle": "4x4\n3,2\n"}}
        assert client.post("/segment", json=bad_rle).status_code == 422

    def test_no_or_two_sources_is_400(self, served):
        client, *_ = served
        ids = client.get("/images").json()["images"]
        assert client.post("/segment", json={"prompts": {"box": [1, 1, 5, 5]}}).status_code == 400
        two = {**_box_request(ids[0]), "image_png_b64": "aGk="}
        assert client.post("/segment", json=two).status_code == 400

    def test_oversized_inline_png_is_413(self, served):
        client, *_ = served
        payload = base64.b64encode(b"\x00" * ((1 << 20) + 1)).decode("ascii")
        r = client.post("/segment", json={"image_png_b64": payload, "prompts": {"box": [1, 1, 5, 5]}})
        assert r.status_code == 413

    def test_empty_prompts_rejected(self, served):
        client, *_ = served
        ids = client.get("/images").json()["images"]
        assert client.post("/segment", json={"image_id": ids[0], "prompts": {}}).status_code == 422


class TestCliServiceParity:
    def test_rle_equality_cli_vs_service(self, served):
        import contextlib
        import io as iomod

        from promptseg.cli import main

        client, model, ds, ckpt = served
        ids = client.get("/images").json()["images"]
        rng = np.random.default_rng(0)
        for _ in range(4):
            image_id = ids[int(rng.integers(len(ids)))]
            x0, y0 = rng.integers(2, 20, size=2)
            x1, y1 = rng.integers(30, 60, size=2)
            body = {
                "image_id": image_id,
                "prompts": {"box": [int(x0), int(y0), int(x1), int(y1)]},
                "return": ["corrected"],
            }
            service_rle = client.post("/segment", json=body).json()["masks"]["corrected"]
            buf = iomod.StringIO()
            with contextlib.redirect_stdout(buf):
                rc = main(
                    [
                        "segment",
                        "--ckpt",
                        str(ckpt),
                        "--data",
                        str(ds.directory),
                        "--image-id",
                        image_id,
                        "--box",
                        f"{x0},{y0},{x1},{y1}",
                        "--branch",
                        "corrected",
                    ]
                )
            assert rc == 0
            assert buf.getvalue() == service_rle

    def test_latency_budget(self, served):
        client, *_ = served
        ids = client.get("/images").json()["images"]
        lat = []
        for _ in range(12):
            body = client.post("/segment", json=_box_request(ids[0], ("corrected",))).json()
            lat.append(body["latency_ms"])
        lat.sort()
        assert lat[-1] < 500.0  # p99 budget at mini scale, single core

    def test_thin_client_against_live_server(self, served):
        import contextlib
        import io as iomod
        import socket
        import threading
        import time

        import uvicorn

        from promptseg.cli import main
        from promptseg.service import create_app

        _client, model, ds, ckpt = served
        with socket.socket() as s:
            s.bind(("127.0.0.1", 0))
            port = s.getsockname()[1]
        config = uvicorn.Config(create_app(ckpt, ds.directory), host="127.0.0.1", port=port, log_level="error")
        server = uvicorn.Server(config)
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        try:
            for _ in range(100):
                if server.started:
                    break
                time.sleep(0.05)
            assert server.started, "uvicorn did not start"
            args_common = ["--image-id", "scene_00000", "--box", "6,6,50,50", "--branch", "corrected"]
            local = iomod.StringIO()
            with contextlib.redirect_stdout(local):
                assert main(["segment", "--ckpt", str(ckpt), "--data", str(ds.directory), *args_common]) == 0
            remote = iomod.StringIO()
            with contextlib.redirect_stdout(remote):
                assert main(["segment", "--server", f"http://127.0.0.1:{port}", *args_common]) == 0
            assert local.getvalue() == remote.getvalue()
        finally:
            server.should_exit = True
            thread.join(timeout=5)
