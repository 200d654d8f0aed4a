"""Named parameter registry shared by model construction and checkpoints."""

from __future__ import annotations

import hashlib
from typing import Callable, Iterator

import numpy as np

from .tensor import NumericsError, Tensor, default_dtype


class Parameter:
    """A named tensor with a trainable flag.

    `trainable` mirrors the tensor's requires_grad so that freezing a
    parameter both removes it from optimizer updates and prunes its
    branch from the backward graph.
    """

    __slots__ = ("name", "tensor")

    def __init__(self, name: str, tensor: Tensor, trainable: bool = True):
        self.name = name
        self.tensor = tensor
        self.tensor.requires_grad = trainable

    @property
    def trainable(self) -> bool:
        return self.tensor.requires_grad

    @trainable.setter
    def trainable(self, value: bool) -> None:
        self.tensor.requires_grad = value

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    def checksum(self) -> str:
        raw = np.ascontiguousarray(self.tensor.data)
        return hashlib.sha256(raw.tobytes()).hexdigest()

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.tensor.shape}, trainable={self.trainable})"


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    """Normal samples with |x| <= 2*std, resampled until in range."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return out


class ParamStore:
    """Ordered name → Parameter map; names must be unique."""

    def __init__(self):
        self._params: dict[str, Parameter] = {}

    def add(
        self,
        name: str,
        init: np.ndarray | Callable[[], np.ndarray],
        trainable: bool = True,
    ) -> Tensor:
        if name in self._params:
            raise NumericsError(f"duplicate parameter name {name!r}")
        data = init() if callable(init) else init
        tensor = Tensor(np.asarray(data, dtype=default_dtype()))
        self._params[name] = Parameter(name, tensor, trainable=trainable)
        return tensor

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def tensors(self) -> list[Tensor]:
        return [p.tensor for p in self]

    def trainable(self) -> list[Parameter]:
        return [p for p in self if p.trainable]

    def zero_grad(self) -> None:
        for p in self:
            p.tensor.grad = None

    def set_trainable(self, predicate: Callable[[str], bool]) -> None:
        for p in self:
            p.trainable = bool(predicate(p.name))

    def count(self, trainable_only: bool = False) -> int:
        return sum(p.tensor.size for p in self if p.trainable or not trainable_only)

    def checksums(self) -> dict[str, str]:
        return {p.name: p.checksum() for p in self}

    def snapshot(self) -> dict[str, np.ndarray]:
        return {p.name: p.tensor.data.copy() for p in self}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for p in self:
            p.tensor.data = snap[p.name].copy()

    def astype(self, dtype) -> None:
        for p in self:
            p.tensor.data = p.tensor.data.astype(dtype)
