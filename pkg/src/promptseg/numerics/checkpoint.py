"""Binary checkpoint format.

Layout: magic bytes "MSAMHQ1\\0", a little-endian u32 byte length, a
UTF-8 JSON header (format version, dtype, model config, ordered
parameter records), then each parameter's raw little-endian data in
header order.  Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .params import Parameter, ParamStore

MAGIC = b"MSAMHQ1\x00"
FORMAT_VERSION = 1

_DTYPES = {"float32": "<f4", "float64": "<f8"}


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path: str | Path, store: ParamStore, config: dict, extra: dict | None = None) -> None:
    dtypes = {p.tensor.data.dtype.name for p in store}
    if len(dtypes) != 1:
        raise CheckpointError(f"mixed parameter dtypes {sorted(dtypes)}")
    dtype = dtypes.pop()
    if dtype not in _DTYPES:
        raise CheckpointError(f"unsupported dtype {dtype}")
    header = {
        "format": FORMAT_VERSION,
        "dtype": dtype,
        "config": config,
        "params": [
            {"name": p.name, "shape": list(p.tensor.shape), "trainable": p.trainable}
            for p in store
        ],
    }
    if extra:
        header["extra"] = extra
    raw = json.dumps(header, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        le = np.dtype(_DTYPES[dtype])
        for p in store:
            fh.write(np.ascontiguousarray(p.tensor.data, dtype=le).tobytes())


def load_checkpoint(path: str | Path) -> tuple[dict, ParamStore]:
    """Read a checkpoint into a fresh ParamStore; returns (header, store)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"bad magic bytes in {path}")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("format") != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint format {header.get('format')}")
        dtype = header["dtype"]
        if dtype not in _DTYPES:
            raise CheckpointError(f"unsupported dtype {dtype}")
        le = np.dtype(_DTYPES[dtype])
        store = ParamStore()
        for rec in header["params"]:
            shape = tuple(rec["shape"])
            n = int(np.prod(shape)) if shape else 1
            buf = fh.read(n * le.itemsize)
            if len(buf) != n * le.itemsize:
                raise CheckpointError(f"truncated data for parameter {rec['name']!r}")
            arr = np.frombuffer(buf, dtype=le).reshape(shape).astype(dtype, copy=True)
            t = store.add(rec["name"], arr, trainable=rec["trainable"])
            t.data = t.data.astype(dtype, copy=False)
        trailing = fh.read(1)
        if trailing:
            raise CheckpointError("trailing bytes after parameter data")
    return header, store


def load_params_into(path: str | Path, store: ParamStore) -> dict:
    """Load checkpoint values into an existing store (names must match)."""
    header, loaded = load_checkpoint(path)
    loaded_names = set(loaded.names())
    own_names = set(store.names())
    if loaded_names != own_names:
        missing = sorted(own_names - loaded_names)
        surplus = sorted(loaded_names - own_names)
        raise CheckpointError(f"parameter name mismatch: missing={missing}, surplus={surplus}")
    for p in store:
        src: Parameter = loaded[p.name]
        if src.tensor.shape != p.tensor.shape:
            raise CheckpointError(f"shape mismatch for {p.name!r}")
        p.tensor.data = src.tensor.data.astype(p.tensor.data.dtype, copy=True)
        p.trainable = src.trainable
    return header
