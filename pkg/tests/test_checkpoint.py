import hashlib

import numpy as np
import pytest

from promptseg import numerics as N
from promptseg.numerics import CheckpointError, ParamStore, load_checkpoint, load_params_into, save_checkpoint


def make_store(rng, dtype=np.float32):
    store = ParamStore()
    store.add("enc.w", rng.normal(size=(4, 3)).astype(dtype))
    store.add("enc.b", rng.normal(size=(3,)).astype(dtype), trainable=False)
    store.add("head.k", rng.normal(size=(2, 2, 2, 2)).astype(dtype))
    return store


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path, rng):
        store = make_store(rng)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, store, {"image_size": 128}, extra={"stage": "base"})
        header, loaded = load_checkpoint(path)
        assert header["config"] == {"image_size": 128}
        assert header["extra"] == {"stage": "base"}
        assert loaded.names() == store.names()
        for p in store:
            q = loaded[p.name]
            assert q.trainable == p.trainable
            assert q.tensor.data.dtype == p.tensor.data.dtype
            assert np.array_equal(q.tensor.data, p.tensor.data)
        # re-saving the loaded store reproduces identical bytes
        path2 = tmp_path / "model2.ckpt"
        save_checkpoint(path2, loaded, {"image_size": 128}, extra={"stage": "base"})
        assert hashlib.sha256(path.read_bytes()).digest() == hashlib.sha256(path2.read_bytes()).digest()

    def test_float64_round_trip(self, tmp_path, rng):
        N.set_precision("verify64")
        store = make_store(rng, dtype=np.float64)
        path = tmp_path / "model64.ckpt"
        save_checkpoint(path, store, {})
        header, loaded = load_checkpoint(path)
        assert header["dtype"] == "float64"
        assert np.array_equal(loaded["enc.w"].tensor.data, store["enc.w"].tensor.data)

    def test_magic_validation(self, tmp_path, rng):
        path = tmp_path / "bad.ckpt"
        save_checkpoint(path, make_store(rng), {})
        data = bytearray(path.read_bytes())
        data[0] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_truncation_detected(self, tmp_path, rng):
        path = tmp_path / "trunc.ckpt"
        save_checkpoint(path, make_store(rng), {})
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_load_into_name_mismatch(self, tmp_path, rng):
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, make_store(rng), {})
        other = ParamStore()
        other.add("different", np.zeros((2, 2), dtype=np.float32))
        with pytest.raises(CheckpointError, match="mismatch"):
            load_params_into(path, other)
