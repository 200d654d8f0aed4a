"""Graph-building layers over the parameter store."""

from __future__ import annotations

from .. import numerics as N
from ..numerics import Tensor
from .config import ModelConfig


class Linear:
    def __init__(self, store, name: str):
        self.w = store[f"{name}.w"].tensor
        self.b = store[f"{name}.b"].tensor

    def __call__(self, x: Tensor) -> Tensor:
        return N.linear(x, self.w, self.b)


class LayerNorm:
    def __init__(self, store, name: str, eps: float = 1e-5):
        self.g = store[f"{name}.g"].tensor
        self.b = store[f"{name}.b"].tensor
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return N.layer_norm(x, self.g, self.b, self.eps)


class Mlp2:
    """Two-layer MLP with GELU, as used inside transformer blocks."""

    def __init__(self, store, name: str):
        self.fc1 = Linear(store, f"{name}.fc1")
        self.fc2 = Linear(store, f"{name}.fc2")

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(N.gelu(self.fc1(x)))


class Mlp3:
    """Three-layer MLP with GELU between layers (dynamic-kernel heads)."""

    def __init__(self, store, name: str):
        self.layers = [Linear(store, f"{name}.{i}") for i in range(3)]

    def __call__(self, x: Tensor) -> Tensor:
        x = N.gelu(self.layers[0](x))
        x = N.gelu(self.layers[1](x))
        return self.layers[2](x)


def split_heads(x: Tensor, heads: int) -> Tensor:
    """(L, D) -> (heads, L, D/heads)."""
    rows, dim = x.shape
    return N.transpose(N.reshape(x, (rows, heads, dim // heads)), (1, 0, 2))


def merge_heads(x: Tensor) -> Tensor:
    """(heads, L, hd) -> (L, heads*hd)."""
    h, rows, hd = x.shape
    return N.reshape(N.transpose(x, (1, 0, 2)), (rows, h * hd))


class CrossAttention:
    """Multi-head attention with separate q/k/v/out projections.

    q may live in a different feature space than k/v; projections bring
    both to token_dim before the scaled dot product.
    """

    def __init__(self, store, name: str, heads: int):
        self.q = Linear(store, f"{name}.q")
        self.k = Linear(store, f"{name}.k")
        self.v = Linear(store, f"{name}.v")
        self.out = Linear(store, f"{name}.out")
        self.heads = heads

    def project(self, q_in: Tensor, k_in: Tensor, v_in: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        return (
            split_heads(self.q(q_in), self.heads),
            split_heads(self.k(k_in), self.heads),
            split_heads(self.v(v_in), self.heads),
        )

    def finish(self, attended: Tensor) -> Tensor:
        return self.out(merge_heads(attended))

    def __call__(self, q_in: Tensor, k_in: Tensor, v_in: Tensor) -> Tensor:
        q, k, v = self.project(q_in, k_in, v_in)
        return self.finish(N.attention(q, k, v))


class EncoderBlock:
    """Pre-norm ViT block; windowed attention unless marked global."""

    def __init__(self, store, name: str, cfg: ModelConfig, is_global: bool):
        self.norm1 = LayerNorm(store, f"{name}.norm1")
        self.qkv = Linear(store, f"{name}.attn.qkv")
        self.proj = Linear(store, f"{name}.attn.proj")
        self.norm2 = LayerNorm(store, f"{name}.norm2")
        self.mlp = Mlp2(store, f"{name}.mlp")
        self.heads = cfg.encoder_heads
        self.grid = cfg.grid_side
        self.window = cfg.grid_side if is_global else cfg.window_size

    def __call__(self, x: Tensor) -> Tensor:
        x = x + self._attend(self.norm1(x))
        return x + self.mlp(self.norm2(x))

    def _attend(self, x: Tensor) -> Tensor:
        g, w, h = self.grid, self.window, self.heads
        rows, dim = x.shape
        hd = dim // h
        nw_side = g // w
        qkv = self.qkv(x)  # (L, 3D)
        # partition into windows: (3, windows, heads, w*w, hd)
        t = N.reshape(qkv, (nw_side, w, nw_side, w, 3, h, hd))
        t = N.transpose(t, (4, 0, 2, 5, 1, 3, 6))
        t = N.reshape(t, (3, nw_side * nw_side, h, w * w, hd))
        attended = N.attention(t[0], t[1], t[2])
        t = N.reshape(attended, (nw_side, nw_side, h, w, w, hd))
        t = N.transpose(t, (0, 3, 1, 4, 2, 5))
        return self.proj(N.reshape(t, (rows, dim)))


class TwoWayLayer:
    """One decoder layer: token self-attention, token-to-image attention,
    per-token MLP, then image-to-token attention.

    Positional signals are re-injected at every attention: token
    queries/keys carry the initial token embeddings (`token_pe`) and
    image queries/keys a fixed Fourier grid encoding (`image_pe`), so
    prompt geometry stays sharp through the layer norms instead of
    washing out of the residual stream.

    The first `observer_rows` token rows are read-only observers: they
    attend to everything but are excluded from the keys of both the
    token self-attention and the image-to-token attention, so the
    remaining rows (and the image embedding) compute exactly as if the
    observers were absent.
    """

    def __init__(self, store, name: str, cfg: ModelConfig):
        h = cfg.decoder_heads
        self.self_attn = CrossAttention(store, f"{name}.self_attn", h)
        self.norm1 = LayerNorm(store, f"{name}.norm1")
        self.t2i = CrossAttention(store, f"{name}.t2i", h)
        self.norm2 = LayerNorm(store, f"{name}.norm2")
        self.mlp = Mlp2(store, f"{name}.mlp")
        self.norm3 = LayerNorm(store, f"{name}.norm3")
        self.i2t = CrossAttention(store, f"{name}.i2t", h)
        self.norm4 = LayerNorm(store, f"{name}.norm4")

    def __call__(
        self,
        tokens: Tensor,
        image: Tensor,
        token_pe: Tensor,
        image_pe: Tensor,
        observer_rows: int = 1,
    ):
        obs = observer_rows
        qk = tokens + token_pe
        q, k, v = self.self_attn.project(qk, qk, tokens)
        base_out = N.attention(q[:, obs:, :], k[:, obs:, :], v[:, obs:, :])
        if obs:
            observer_out = N.attention(q[:, :obs, :], k, v)
            sa = self.self_attn.finish(N.concat([observer_out, base_out], axis=1))
        else:
            sa = self.self_attn.finish(base_out)
        tokens = self.norm1(tokens + sa)
        tokens = self.norm2(tokens + self.t2i(tokens + token_pe, image + image_pe, image))
        tokens = self.norm3(tokens + self.mlp(tokens))
        base_tokens = tokens[obs:] if obs else tokens
        base_keys = base_tokens + (token_pe[obs:] if obs else token_pe)
        image = self.norm4(image + self.i2t(image + image_pe, base_keys, base_tokens))
        return tokens, image
