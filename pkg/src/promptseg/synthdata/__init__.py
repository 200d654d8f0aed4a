"""Synthetic fine-structure scenes, label coarsening, dataset files."""

from .dataset import (
    DatasetError,
    DatasetItem,
    DatasetManifest,
    SceneDataset,
    load_item,
    read_dataset,
    read_manifest,
    write_dataset,
)
from .rle import RleError, decode_rle, encode_rle
from .scenes import FAMILIES, Scene, SceneInstance, SceneSpec, coarsen_labels, generate_scene

__all__ = [
    "FAMILIES",
    "SceneSpec",
    "Scene",
    "SceneInstance",
    "generate_scene",
    "coarsen_labels",
    "encode_rle",
    "decode_rle",
    "RleError",
    "DatasetManifest",
    "DatasetItem",
    "DatasetError",
    "write_dataset",
    "read_dataset",
    "read_manifest",
    "load_item",
    "SceneDataset",
]
