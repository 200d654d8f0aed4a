"""Differentiable ops over Tensor.

Elementwise ops support the limited broadcasting the model needs
(trailing-dim bias adds, channel-wise scales); matmul supports stacked
leading batch dims when both operands share them.  Anything fancier is
deliberately out of scope.
"""

from __future__ import annotations

import math

import numpy as np

from .tensor import NumericsError, ShapeError, Tensor, as_tensor, result

_GELU_C = math.sqrt(2.0 / math.pi)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check_dtypes(op: str, a: Tensor, b: Tensor) -> None:
    if a.data.dtype != b.data.dtype:
        raise NumericsError(
            f"op {op!r} mixes dtypes {a.data.dtype.name} and {b.data.dtype.name}"
        )


# -- arithmetic --------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_dtypes("add", a, b)
    return result(
        "add",
        a.data + b.data,
        (a, b),
        (lambda g: _unbroadcast(g, a.data.shape), lambda g: _unbroadcast(g, b.data.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_dtypes("sub", a, b)
    return result(
        "sub",
        a.data - b.data,
        (a, b),
        (lambda g: _unbroadcast(g, a.data.shape), lambda g: _unbroadcast(-g, b.data.shape)),
    )


def mul(a, b) -> Tensor:
    if isinstance(b, (int, float)) and not isinstance(b, bool):
        a = as_tensor(a)
        s = a.data.dtype.type(b)
        return result("mul", a.data * s, (a,), (lambda g: g * s,))
    a, b = as_tensor(a), as_tensor(b)
    _check_dtypes("mul", a, b)
    return result(
        "mul",
        a.data * b.data,
        (a, b),
        (
            lambda g: _unbroadcast(g * b.data, a.data.shape),
            lambda g: _unbroadcast(g * a.data, b.data.shape),
        ),
    )


def div(a, b) -> Tensor:
    if isinstance(b, (int, float)) and not isinstance(b, bool):
        return mul(a, 1.0 / b)
    a, b = as_tensor(a), as_tensor(b)
    _check_dtypes("div", a, b)
    return result(
        "div",
        a.data / b.data,
        (a, b),
        (
            lambda g: _unbroadcast(g / b.data, a.data.shape),
            lambda g: _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        ),
    )


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return result("exp", out, (a,), (lambda g: g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    return result("log", np.log(a.data), (a,), (lambda g: g / a.data,))


# -- shape ops ---------------------------------------------------------


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    src = a.data.shape
    return result("reshape", a.data.reshape(shape), (a,), (lambda g: g.reshape(src),))


def transpose(a: Tensor, axes: tuple[int, ...] | None = None) -> Tensor:
    if axes is None:
        axes = tuple(range(a.ndim - 1, -1, -1))
    inv = tuple(np.argsort(axes))
    return result(
        "transpose",
        np.transpose(a.data, axes),
        (a,),
        (lambda g: np.transpose(g, inv),),
    )


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat of empty list")
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def make_vjp(i: int):
        lo, hi = offsets[i], offsets[i + 1]

        def vjp(g: np.ndarray) -> np.ndarray:
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            return g[tuple(index)]

        return vjp

    return result(
        "concat",
        np.concatenate([t.data for t in tensors], axis=axis),
        tensors,
        tuple(make_vjp(i) for i in range(len(tensors))),
    )


def getitem(a: Tensor, key) -> Tensor:
    out = a.data[key]
    if not isinstance(out, np.ndarray):
        out = np.asarray(out, dtype=a.data.dtype)
    src_shape = a.data.shape

    def vjp(g: np.ndarray) -> np.ndarray:
        full = np.zeros(src_shape, dtype=g.dtype)
        # basic slicing only: destination region is non-overlapping
        full[key] = g.reshape(full[key].shape)
        return full

    return result("getitem", out, (a,), (vjp,))


def broadcast_to(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    return result(
        "broadcast_to",
        np.ascontiguousarray(np.broadcast_to(a.data, shape)),
        (a,),
        (lambda g: _unbroadcast(g, a.data.shape),),
    )


# -- reductions --------------------------------------------------------


def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    src = a.data.shape

    def vjp(g: np.ndarray) -> np.ndarray:
        if axis is None:
            return np.broadcast_to(g, src).astype(g.dtype, copy=True)
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, src).astype(g.dtype, copy=True)

    return result("sum", np.sum(a.data, axis=axis, keepdims=keepdims), (a,), (vjp,))


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    src = a.data.shape
    if axis is None:
        n = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = 1
        for ax in axes:
            n *= src[ax]

    def vjp(g: np.ndarray) -> np.ndarray:
        if axis is None:
            return np.broadcast_to(g / n, src).astype(g.dtype, copy=True)
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg / n, src).astype(g.dtype, copy=True)

    return result("mean", np.mean(a.data, axis=axis, keepdims=keepdims), (a,), (vjp,))


# -- linear algebra ----------------------------------------------------


def matmul(a, b) -> Tensor:
    """Matrix product, optionally stacked over identical leading dims."""
    a, b = as_tensor(a), as_tensor(b)
    _check_dtypes("matmul", a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul requires >=2-D operands")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul inner dims differ: {a.data.shape} @ {b.data.shape}")
    if a.data.shape[:-2] != b.data.shape[:-2]:
        raise ShapeError("matmul batch dims must match exactly")
    out = np.matmul(a.data, b.data)
    return result(
        "matmul",
        out,
        (a, b),
        (
            lambda g: np.matmul(g, b.data.swapaxes(-1, -2)),
            lambda g: np.matmul(a.data.swapaxes(-1, -2), g),
        ),
    )


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Fused affine map rows @ w + b for 2-D inputs."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    _check_dtypes("linear", x, w)
    if x.ndim != 2 or w.ndim != 2 or b.ndim != 1:
        raise ShapeError("linear expects x:(L,Din), w:(Din,Dout), b:(Dout,)")
    if x.data.shape[1] != w.data.shape[0] or w.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"linear shape mismatch: {x.data.shape} @ {w.data.shape} + {b.data.shape}")
    out = x.data @ w.data
    out += b.data
    return result(
        "linear",
        out,
        (x, w, b),
        (
            lambda g: g @ w.data.T,
            lambda g: x.data.T @ g,
            lambda g: g.sum(axis=0),
        ),
    )


# -- nonlinearities ----------------------------------------------------


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return result("sigmoid", out, (a,), (lambda g: g * out * (1.0 - out),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return result("tanh", out, (a,), (lambda g: g * (1.0 - out * out),))


def gelu(a) -> Tensor:
    """GELU, tanh approximation (standard ViT practice)."""
    a = as_tensor(a)
    x = a.data
    c = x.dtype.type(_GELU_C)
    k = x.dtype.type(0.044715)
    x2 = x * x
    t = np.tanh(c * (x + k * (x2 * x)))
    out = 0.5 * x * (1.0 + t)

    def vjp(g: np.ndarray) -> np.ndarray:
        sech2 = 1.0 - t * t
        return g * (0.5 * (1.0 + t) + x * sech2 * (0.5 * c) * (1.0 + 3 * k * x2))

    return result("gelu", out, (a,), (vjp,))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def vjp(g: np.ndarray) -> np.ndarray:
        dot = np.sum(g * out, axis=axis, keepdims=True)
        return out * (g - dot)

    return result("softmax", out, (a,), (vjp,))


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Zero-mean unit-variance normalization over the last axis, then affine."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if eps <= 0:
        raise NumericsError("layer_norm requires eps > 0")
    d = x.data.shape[-1]
    if gamma.data.shape != (d,) or beta.data.shape != (d,):
        raise ShapeError("layer_norm gamma/beta must match the last dim")
    mu = np.mean(x.data, axis=-1, keepdims=True)
    xc = x.data - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xn = xc * inv
    out = xn * gamma.data + beta.data

    reduce_axes = tuple(range(x.data.ndim - 1))

    def vjp_x(g: np.ndarray) -> np.ndarray:
        gxn = g * gamma.data
        m1 = np.mean(gxn, axis=-1, keepdims=True)
        m2 = np.mean(gxn * xn, axis=-1, keepdims=True)
        return inv * (gxn - m1 - xn * m2)

    return result(
        "layer_norm",
        out,
        (x, gamma, beta),
        (
            vjp_x,
            lambda g: np.sum(g * xn, axis=reduce_axes) if reduce_axes else g * xn,
            lambda g: np.sum(g, axis=reduce_axes) if reduce_axes else g,
        ),
    )


def attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """Scaled dot-product attention: softmax(q kᵀ / sqrt(D)) v.

    Accepts stacked leading batch dims shared by q/k/v (used for
    windows and heads).  The softmax runs over the key axis, so every
    output row is a convex combination of value rows.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    d = q.data.shape[-1]
    if k.data.shape[-1] != d:
        raise ShapeError("attention q/k feature dims differ")
    if k.data.shape[-2] == 0:
        raise ShapeError("attention over an empty key set")
    if k.data.shape[:-1] != v.data.shape[:-1]:
        raise ShapeError("attention k/v row counts differ")
    # scale q rather than the (larger) score matrix
    scores = matmul(mul(q, 1.0 / math.sqrt(d)), transpose_last(k))
    return matmul(softmax(scores, axis=-1), v)


def transpose_last(a: Tensor) -> Tensor:
    axes = tuple(range(a.ndim - 2)) + (a.ndim - 1, a.ndim - 2)
    return transpose(a, axes)


def bce_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Per-element binary cross-entropy from logits, numerically stable."""
    logits = as_tensor(logits)
    t = np.asarray(targets, dtype=logits.data.dtype)
    if t.shape != logits.data.shape:
        raise ShapeError("bce_with_logits target shape mismatch")
    z = logits.data
    out = np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))
    return result("bce_with_logits", out, (logits,), (lambda g: g * (_sigmoid(z) - t),))


# -- convolutions ------------------------------------------------------


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of a C×H×W input with a C'×C×kh×kw kernel.

    Two code paths: a reshape-only path when stride == kernel size with
    no padding (patchify convs), and an im2col path for stride 1.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    _check_dtypes("conv2d", x, kernel)
    if x.ndim != 3 or kernel.ndim != 4:
        raise ShapeError("conv2d expects x:C×H×W, kernel:C'×C×kh×kw")
    c, h, w = x.data.shape
    co, ci, kh, kw = kernel.data.shape
    if ci != c:
        raise ShapeError(f"conv2d channel mismatch: input {c}, kernel {ci}")
    if (h + 2 * padding - kh) % stride or (w + 2 * padding - kw) % stride:
        raise ShapeError("conv2d output size is not integral")
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1

    if stride == kh == kw and padding == 0:
        return _conv2d_patchify(x, kernel, ho, wo)
    if stride == 1:
        return _conv2d_im2col(x, kernel, padding, ho, wo)
    raise ShapeError("conv2d supports stride==kernel (padding 0) or stride 1")


def _conv2d_patchify(x: Tensor, kernel: Tensor, ho: int, wo: int) -> Tensor:
    c, h, w = x.data.shape
    co, _, kh, kw = kernel.data.shape
    # non-overlapping windows: im2col and col2im are pure reshapes
    patches = (
        x.data.reshape(c, ho, kh, wo, kw).transpose(1, 3, 0, 2, 4).reshape(ho * wo, c * kh * kw)
    )
    kmat = kernel.data.reshape(co, c * kh * kw)
    out = (patches @ kmat.T).T.reshape(co, ho, wo)

    def vjp_x(g: np.ndarray) -> np.ndarray:
        gflat = g.reshape(co, ho * wo).T
        dpatches = gflat @ kmat
        return (
            dpatches.reshape(ho, wo, c, kh, kw).transpose(2, 0, 3, 1, 4).reshape(c, h, w)
        )

    def vjp_k(g: np.ndarray) -> np.ndarray:
        gflat = g.reshape(co, ho * wo)
        return (gflat @ patches).reshape(co, c, kh, kw)

    return result("conv2d", out, (x, kernel), (vjp_x, vjp_k))


def _im2col(x: np.ndarray, kh: int, kw: int, padding: int, ho: int, wo: int) -> np.ndarray:
    c = x.shape[0]
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    s0, s1, s2 = x.strides
    view = np.lib.stride_tricks.as_strided(
        x, shape=(c, kh, kw, ho, wo), strides=(s0, s1, s2, s1, s2), writeable=False
    )
    return view.reshape(c * kh * kw, ho * wo)


def _conv2d_im2col(x: Tensor, kernel: Tensor, padding: int, ho: int, wo: int) -> Tensor:
    c, h, w = x.data.shape
    co, _, kh, kw = kernel.data.shape
    cols = np.ascontiguousarray(_im2col(x.data, kh, kw, padding, ho, wo))
    kmat = kernel.data.reshape(co, c * kh * kw)
    out = (kmat @ cols).reshape(co, ho, wo)

    def vjp_x(g: np.ndarray) -> np.ndarray:
        # input grad is a full correlation with the flipped kernel
        kflip = kernel.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3).reshape(c, co * kh * kw)
        pad_g = kh - 1 - padding
        gc = _im2col(g.reshape(co, ho, wo), kh, kw, pad_g, h, w)
        return (kflip @ np.ascontiguousarray(gc)).reshape(c, h, w)

    def vjp_k(g: np.ndarray) -> np.ndarray:
        return (g.reshape(co, ho * wo) @ cols.T).reshape(co, c, kh, kw)

    return result("conv2d", out, (x, kernel), (vjp_x, vjp_k))


def transposed_conv2d(x: Tensor, kernel: Tensor, stride: int = 2) -> Tensor:
    """Fractionally-strided convolution; kernel layout C×C'×kh×kw.

    With kh == kw == stride (the configuration the model uses) output
    windows do not overlap, so forward/backward are reshaped matmuls.
    It is the exact adjoint of conv2d with the same kernel (first two
    kernel axes swapped), which the test suite checks by inner product.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    _check_dtypes("transposed_conv2d", x, kernel)
    if x.ndim != 3 or kernel.ndim != 4:
        raise ShapeError("transposed_conv2d expects x:C×H×W, kernel:C×C'×kh×kw")
    c, h, w = x.data.shape
    ci, co, kh, kw = kernel.data.shape
    if ci != c:
        raise ShapeError(f"transposed_conv2d channel mismatch: input {c}, kernel {ci}")
    ho, wo = (h - 1) * stride + kh, (w - 1) * stride + kw

    if kh == kw == stride:
        kmat = kernel.data.reshape(c, co * kh * kw)
        scat = (x.data.reshape(c, h * w).T @ kmat).reshape(h, w, co, kh, kw)
        out = scat.transpose(2, 0, 3, 1, 4).reshape(co, ho, wo)

        def vjp_x(g: np.ndarray) -> np.ndarray:
            gs = g.reshape(co, h, kh, w, kw).transpose(1, 3, 2, 4, 0).reshape(h * w, kh * kw * co)
            km = kernel.data.transpose(0, 2, 3, 1).reshape(c, kh * kw * co)
            return (gs @ km.T).T.reshape(c, h, w)

        def vjp_k(g: np.ndarray) -> np.ndarray:
            gs = g.reshape(co, h, kh, w, kw).transpose(1, 3, 0, 2, 4).reshape(h * w, co * kh * kw)
            return (x.data.reshape(c, h * w) @ gs).reshape(c, co, kh, kw)

        return result("transposed_conv2d", out, (x, kernel), (vjp_x, vjp_k))

    # general (overlapping) path, used only off the hot loop
    out = np.zeros((co, ho, wo), dtype=x.data.dtype)
    for i in range(h):
        for j in range(w):
            out[:, i * stride : i * stride + kh, j * stride : j * stride + kw] += np.einsum(
                "c,cokl->okl", x.data[:, i, j], kernel.data
            )

    def vjp_x_gen(g: np.ndarray) -> np.ndarray:
        dx = np.empty((c, h, w), dtype=g.dtype)
        for i in range(h):
            for j in range(w):
                win = g[:, i * stride : i * stride + kh, j * stride : j * stride + kw]
                dx[:, i, j] = np.einsum("okl,cokl->c", win, kernel.data)
        return dx

    def vjp_k_gen(g: np.ndarray) -> np.ndarray:
        dk = np.zeros_like(kernel.data)
        for i in range(h):
            for j in range(w):
                win = g[:, i * stride : i * stride + kh, j * stride : j * stride + kw]
                dk += np.einsum("c,okl->cokl", x.data[:, i, j], win)
        return dk

    return result("transposed_conv2d", out, (x, kernel), (vjp_x_gen, vjp_k_gen))
