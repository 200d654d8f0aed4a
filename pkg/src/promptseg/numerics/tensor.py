"""Reverse-mode autodiff over numpy arrays.

A Tensor wraps one ndarray plus the bookkeeping needed to backpropagate:
the parent tensors it was computed from and one vector-Jacobian-product
closure per parent.  Graphs are single-use (built per forward pass,
released when the loss tensor goes out of scope) and confined to one
logical thread.

Two precision modes exist as a global run configuration: "fast32" for
training/inference and "verify64" for gradient verification.  The mode
only affects tensor *creation*; ops preserve the dtype of their inputs
and refuse to mix dtypes, so a model never silently changes precision
mid-graph.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

_MODES = {"fast32": np.float32, "verify64": np.float64}

_state = {
    "mode": "fast32",
    "grad_enabled": True,
    "nan_checks": True,
}


class NumericsError(RuntimeError):
    """Base class for tensor-library failures."""


class ShapeError(NumericsError):
    """Operand shapes are incompatible with the requested op."""


class NonFiniteError(NumericsError):
    """A forward op produced NaN or Inf; carries the producing op's name."""

    def __init__(self, op: str):
        super().__init__(f"non-finite value produced by op '{op}'")
        self.op = op


def set_precision(mode: str) -> None:
    if mode not in _MODES:
        raise ValueError(f"unknown precision mode {mode!r}; expected one of {sorted(_MODES)}")
    _state["mode"] = mode


def precision_mode() -> str:
    return _state["mode"]


def default_dtype() -> np.dtype:
    return np.dtype(_MODES[_state["mode"]])


@contextlib.contextmanager
def precision(mode: str):
    """Temporarily switch the global precision mode."""
    prev = _state["mode"]
    set_precision(mode)
    try:
        yield
    finally:
        _state["mode"] = prev


@contextlib.contextmanager
def no_grad():
    """Disable graph recording; forwards inside run grad-free."""
    prev = _state["grad_enabled"]
    _state["grad_enabled"] = False
    try:
        yield
    finally:
        _state["grad_enabled"] = prev


def grad_enabled() -> bool:
    return _state["grad_enabled"]


@contextlib.contextmanager
def nan_checks(enabled: bool):
    prev = _state["nan_checks"]
    _state["nan_checks"] = enabled
    try:
        yield
    finally:
        _state["nan_checks"] = prev


class Tensor:
    """N-dimensional array with optional gradient tracking."""

    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_vjps")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype if dtype is not None else default_dtype())
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(default_dtype())
        self.data: np.ndarray = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._vjps: tuple[Callable[[np.ndarray], np.ndarray], ...] = ()

    # -- introspection ------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> Tensor:
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, op={self.op!r})"

    # -- constructors -------------------------------------------------

    @staticmethod
    def zeros(shape: Sequence[int], requires_grad: bool = False) -> Tensor:
        return Tensor(np.zeros(shape, dtype=default_dtype()), requires_grad)

    @staticmethod
    def ones(shape: Sequence[int], requires_grad: bool = False) -> Tensor:
        return Tensor(np.ones(shape, dtype=default_dtype()), requires_grad)

    @staticmethod
    def full(shape: Sequence[int], value: float, requires_grad: bool = False) -> Tensor:
        return Tensor(np.full(shape, value, dtype=default_dtype()), requires_grad)

    # -- backward -----------------------------------------------------

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Backpropagate from this tensor through the recorded graph.

        Without an explicit seed gradient this tensor must be scalar.
        Gradients accumulate into `.grad` of every reachable tensor with
        requires_grad=True (intermediates included).
        """
        if not self.requires_grad:
            raise NumericsError("backward() on a tensor that does not require grad")
        if grad is None:
            if self.data.size != 1:
                raise NumericsError("backward() without a seed gradient requires a scalar")
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=self.data.dtype)
            if grad.shape != self.data.shape:
                raise ShapeError("seed gradient shape mismatch")

        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))

        self.grad = grad if self.grad is None else self.grad + grad
        for node in reversed(topo):
            g = node.grad
            if g is None:
                continue
            for parent, vjp in zip(node._parents, node._vjps):
                if not parent.requires_grad:
                    continue
                contrib = vjp(g)
                if contrib.shape != parent.data.shape:
                    raise ShapeError(
                        f"vjp of op {node.op!r} returned shape {contrib.shape} "
                        f"for parent of shape {parent.data.shape}"
                    )
                if parent.grad is None:
                    parent.grad = contrib.copy() if contrib is g else contrib
                else:
                    parent.grad = parent.grad + contrib

    def zero_grad(self) -> None:
        self.grad = None

    # -- operator sugar (implemented in functional.py) ----------------

    def __add__(self, other):
        from . import functional as F

        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import functional as F

        return F.sub(self, other)

    def __rsub__(self, other):
        from . import functional as F

        return F.sub(other, self)

    def __mul__(self, other):
        from . import functional as F

        return F.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import functional as F

        return F.div(self, other)

    def __neg__(self):
        from . import functional as F

        return F.mul(self, -1.0)

    def __matmul__(self, other):
        from . import functional as F

        return F.matmul(self, other)

    def __getitem__(self, key):
        from . import functional as F

        return F.getitem(self, key)

    def reshape(self, *shape):
        from . import functional as F

        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def transpose(self, *axes):
        from . import functional as F

        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return F.transpose(self, axes if axes else None)

    def sum(self, axis=None, keepdims: bool = False):
        from . import functional as F

        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from . import functional as F

        return F.mean(self, axis=axis, keepdims=keepdims)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def result(
    op: str,
    data: np.ndarray,
    parents: Iterable[Tensor],
    vjps: Iterable[Callable[[np.ndarray], np.ndarray]],
) -> Tensor:
    """Wrap an op's output array; record the graph edge if grads are on.

    Every forward result passes through here, which is where the
    NaN/Inf policy lives: a non-finite output aborts with the producing
    op's name.
    """
    # single-pass finiteness probe: any NaN/Inf in the array makes the
    # pairwise sum non-finite (inf-inf yields nan), with no bool temp
    if _state["nan_checks"] and not np.isfinite(data.sum()):
        if not np.isfinite(data).all():
            raise NonFiniteError(op)
    parents = tuple(parents)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.op = op
    if _state["grad_enabled"] and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjps = tuple(vjps)
    else:
        out.requires_grad = False
        out._parents = ()
        out._vjps = ()
    return out
