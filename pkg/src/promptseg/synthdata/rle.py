"""Text run-length codec for binary masks.

Format (UTF-8, LF endings): line 1 is "WxH"; line 2 is comma-separated
run lengths over the row-major flattened mask, alternating starting
with a background run.  A leading zero-length background run encodes a
mask that starts with foreground.  Runs must sum to W*H.

Note: runs are row-major (unlike COCO's column-major uncompressed RLE);
the format is self-contained so decoders must follow this file, not
COCO conventions.
"""

from __future__ import annotations

import numpy as np

from ..masks import BinaryMask


class RleError(ValueError):
    pass


def encode_rle(mask: BinaryMask) -> str:
    flat = mask.bits
    if flat.size == 0:
        raise RleError("cannot encode an empty-geometry mask")
    changes = np.flatnonzero(np.diff(flat)) + 1
    positions = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(positions).tolist()
    if flat[0]:
        runs = [0] + runs
    return f"{mask.width}x{mask.height}\n" + ",".join(str(r) for r in runs) + "\n"


def decode_rle(text: str) -> BinaryMask:
    lines = text.split("\n")
    if len(lines) < 2:
        raise RleError("rle payload must have a size line and a runs line")
    size_part = lines[0].strip()
    try:
        w_str, h_str = size_part.split("x")
        width, height = int(w_str), int(h_str)
    except ValueError as exc:
        raise RleError(f"bad size line {size_part!r}") from exc
    if width <= 0 or height <= 0:
        raise RleError(f"bad dimensions {width}x{height}")
    try:
        runs = [int(r) for r in lines[1].strip().split(",")]
    except ValueError as exc:
        raise RleError("run lengths must be integers") from exc
    if any(r < 0 for r in runs):
        raise RleError("run lengths must be non-negative")
    total = sum(runs)
    if total != width * height:
        raise RleError(f"run lengths sum to {total}, expected {width * height}")
    flat = np.zeros(width * height, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return BinaryMask.from_bits(width, height, flat)
