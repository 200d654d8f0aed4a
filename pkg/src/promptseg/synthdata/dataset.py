"""Dataset directory format: 8-bit PNGs, text RLE masks, JSON manifest."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..masks import BinaryMask
from .rle import decode_rle, encode_rle
from .scenes import Scene, SceneInstance

FORMAT_VERSION = 1


class DatasetError(RuntimeError):
    pass


@dataclass
class DatasetItem:
    image: str
    masks: list[str]
    families: list[str]


@dataclass
class DatasetManifest:
    name: str
    split: str
    format_version: int = FORMAT_VERSION
    items: list[DatasetItem] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "split": self.split,
            "format_version": self.format_version,
            "items": [
                {"image": i.image, "masks": i.masks, "families": i.families} for i in self.items
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        if d.get("format_version") != FORMAT_VERSION:
            raise DatasetError(f"unsupported dataset format_version {d.get('format_version')}")
        return cls(
            name=d["name"],
            split=d["split"],
            format_version=d["format_version"],
            items=[DatasetItem(i["image"], list(i["masks"]), list(i["families"])) for i in d["items"]],
        )


def _image_to_png(image: np.ndarray, path: Path) -> None:
    arr = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(arr.transpose(1, 2, 0)).save(path, format="PNG")


def png_to_image(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return arr.transpose(2, 0, 1)


def write_dataset(directory: str | Path, name: str, split: str, scenes: list[Scene]) -> DatasetManifest:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest(name=name, split=split)
    for idx, scene in enumerate(scenes):
        stem = f"scene_{idx:05d}"
        image_name = f"{stem}.png"
        _image_to_png(scene.image, directory / image_name)
        mask_names: list[str] = []
        families: list[str] = []
        for j, inst in enumerate(scene.instances):
            if inst.mask.is_empty():
                raise DatasetError(f"empty instance mask in scene {idx}")
            mask_name = f"{stem}_mask_{j:02d}.rle"
            (directory / mask_name).write_text(encode_rle(inst.mask), encoding="utf-8", newline="")
            mask_names.append(mask_name)
            families.append(inst.family)
        manifest.items.append(DatasetItem(image=image_name, masks=mask_names, families=families))
    (directory / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), indent=2), encoding="utf-8"
    )
    return manifest


def read_manifest(directory: str | Path) -> DatasetManifest:
    directory = Path(directory)
    path = directory / "manifest.json"
    if not path.exists():
        raise DatasetError(f"no manifest.json in {directory}")
    manifest = DatasetManifest.from_dict(json.loads(path.read_text(encoding="utf-8")))
    for item in manifest.items:
        for rel in [item.image, *item.masks]:
            if not (directory / rel).exists():
                raise DatasetError(f"manifest references missing file {rel!r}")
    return manifest


def load_item(directory: str | Path, item: DatasetItem) -> Scene:
    directory = Path(directory)
    image = png_to_image(directory / item.image)
    instances = []
    for rel, family in zip(item.masks, item.families):
        mask = decode_rle((directory / rel).read_text(encoding="utf-8"))
        if mask.is_empty():
            raise DatasetError(f"empty mask {rel!r}")
        instances.append(SceneInstance(mask, family))
    return Scene(image=image, instances=instances)


class SceneDataset:
    """Lazy directory-backed dataset with an in-memory decode cache."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.manifest = read_manifest(self.directory)
        self._cache: dict[int, Scene] = {}

    def __len__(self) -> int:
        return len(self.manifest.items)

    def __getitem__(self, idx: int) -> Scene:
        if idx not in self._cache:
            self._cache[idx] = load_item(self.directory, self.manifest.items[idx])
        return self._cache[idx]


def read_dataset(directory: str | Path) -> tuple[DatasetManifest, list[Scene]]:
    """Eager full read; round-trips write_dataset bit-exactly."""
    manifest = read_manifest(directory)
    return manifest, [load_item(directory, item) for item in manifest.items]
