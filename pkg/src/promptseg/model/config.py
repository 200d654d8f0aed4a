"""Model configuration and analytic parameter accounting.

`parameter_shapes` is the single source of truth for parameter names,
shapes, and trainable-group membership: model construction iterates
it, and the parameter-ratio check evaluates it arithmetically without
instantiating anything (needed for full-scale configs).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterator, NamedTuple


@dataclass(frozen=True)
class ModelConfig:
    image_size: int = 128
    patch_size: int = 8
    encoder_dim: int = 64
    encoder_blocks: int = 4
    global_attn_blocks: tuple[int, ...] = (1, 3)
    token_dim: int = 64
    num_mask_tokens: int = 4
    mask_feature_dim: int = 32
    encoder_heads: int = 4
    decoder_heads: int = 4
    encoder_mlp_ratio: int = 4
    decoder_mlp_ratio: int = 2
    window_size: int = 4
    pe_seed: int = 17

    def __post_init__(self):
        if self.image_size % self.patch_size:
            raise ValueError("image_size must be a multiple of patch_size")
        if self.num_mask_tokens != 4:
            raise ValueError("the decoder carries exactly 4 base mask tokens")
        blocks = sorted(set(self.global_attn_blocks))
        if not blocks:
            raise ValueError("at least one global attention block is required")
        if any(b < 0 or b >= self.encoder_blocks for b in blocks):
            raise ValueError("global attention block index out of range")
        if blocks[0] >= self.encoder_blocks - 1:
            raise ValueError("the first global attention block must not be the last block")
        object.__setattr__(self, "global_attn_blocks", tuple(blocks))
        if self.grid_side % self.window_size:
            raise ValueError("embedding grid must be divisible by the window size")
        if self.encoder_dim % self.encoder_heads or self.token_dim % self.decoder_heads:
            raise ValueError("head count must divide the corresponding dim")

    @property
    def grid_side(self) -> int:
        return self.image_size // self.patch_size

    @property
    def mask_side(self) -> int:
        # two stride-2 transposed convs from the embedding grid
        return 4 * self.grid_side

    @property
    def fourier_freqs(self) -> int:
        # per-axis frequency count; sin+cos over two axes fills token_dim
        return self.token_dim // 4

    @property
    def fusion_mid(self) -> int:
        return self.token_dim // 2

    @property
    def upscale_mid(self) -> int:
        return (self.encoder_dim + self.mask_feature_dim) // 2

    @property
    def early_tap_block(self) -> int:
        return self.global_attn_blocks[0]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["global_attn_blocks"] = list(self.global_attn_blocks)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ModelConfig:
        d = dict(d)
        d["global_attn_blocks"] = tuple(d["global_attn_blocks"])
        return cls(**d)


FULL_SCALE_CONFIG = ModelConfig(
    image_size=1024,
    patch_size=16,
    encoder_dim=1024,
    encoder_blocks=24,
    global_attn_blocks=(5, 11, 17, 23),
    token_dim=256,
    mask_feature_dim=32,
    encoder_heads=16,
    decoder_heads=8,
    window_size=16,
)


class ParamSpec(NamedTuple):
    name: str
    shape: tuple[int, ...]
    group: str  # "base" | "hq"


def _linear(name: str, din: int, dout: int, group: str) -> list[ParamSpec]:
    return [ParamSpec(f"{name}.w", (din, dout), group), ParamSpec(f"{name}.b", (dout,), group)]


def _norm(name: str, dim: int, group: str) -> list[ParamSpec]:
    return [ParamSpec(f"{name}.g", (dim,), group), ParamSpec(f"{name}.b", (dim,), group)]


def _conv(name: str, shape: tuple[int, int, int, int], bias: int, group: str) -> list[ParamSpec]:
    return [ParamSpec(f"{name}.k", shape, group), ParamSpec(f"{name}.b", (bias,), group)]


def _mlp3(name: str, din: int, hidden: int, dout: int, group: str) -> list[ParamSpec]:
    return (
        _linear(f"{name}.0", din, hidden, group)
        + _linear(f"{name}.1", hidden, hidden, group)
        + _linear(f"{name}.2", hidden, dout, group)
    )


def parameter_shapes(cfg: ModelConfig) -> list[ParamSpec]:
    e, t, mf = cfg.encoder_dim, cfg.token_dim, cfg.mask_feature_dim
    g = cfg.grid_side
    specs: list[ParamSpec] = []

    specs += _conv("encoder.patch_embed", (e, 3, cfg.patch_size, cfg.patch_size), e, "base")
    specs.append(ParamSpec("encoder.pos_embed", (g * g, e), "base"))
    for i in range(cfg.encoder_blocks):
        p = f"encoder.block{i}"
        specs += _norm(f"{p}.norm1", e, "base")
        specs += _linear(f"{p}.attn.qkv", e, 3 * e, "base")
        specs += _linear(f"{p}.attn.proj", e, e, "base")
        specs += _norm(f"{p}.norm2", e, "base")
        specs += _linear(f"{p}.mlp.fc1", e, cfg.encoder_mlp_ratio * e, "base")
        specs += _linear(f"{p}.mlp.fc2", cfg.encoder_mlp_ratio * e, e, "base")

    # one shared Fourier basis for prompt coordinates and the decoder's
    # image grid, so prompt-to-pixel alignment is innate, not learned
    specs.append(ParamSpec("prompt.fourier", (2, cfg.fourier_freqs), "base"))
    # pad stands in when a prompt carries no sparse elements (mask-only)
    for n in ("point_pos", "point_neg", "box_tl", "box_br", "pad"):
        specs.append(ParamSpec(f"prompt.{n}", (t,), "base"))
    specs.append(ParamSpec("prompt.no_mask", (e,), "base"))
    specs += _conv("prompt.mask_down.c1", (4, 1, 2, 2), 4, "base")
    specs += _conv("prompt.mask_down.c2", (16, 4, 2, 2), 16, "base")
    specs += _conv("prompt.mask_down.c3", (e, 16, 1, 1), e, "base")

    specs.append(ParamSpec("tokens.mask", (cfg.num_mask_tokens, t), "base"))
    specs.append(ParamSpec("tokens.iou", (1, t), "base"))
    for i in range(2):
        p = f"decoder.layer{i}"
        for proj in ("q", "k", "v", "out"):
            specs += _linear(f"{p}.self_attn.{proj}", t, t, "base")
        specs += _norm(f"{p}.norm1", t, "base")
        specs += _linear(f"{p}.t2i.q", t, t, "base")
        specs += _linear(f"{p}.t2i.k", e, t, "base")
        specs += _linear(f"{p}.t2i.v", e, t, "base")
        specs += _linear(f"{p}.t2i.out", t, t, "base")
        specs += _norm(f"{p}.norm2", t, "base")
        specs += _linear(f"{p}.mlp.fc1", t, cfg.decoder_mlp_ratio * t, "base")
        specs += _linear(f"{p}.mlp.fc2", cfg.decoder_mlp_ratio * t, t, "base")
        specs += _norm(f"{p}.norm3", t, "base")
        specs += _linear(f"{p}.i2t.q", e, t, "base")
        specs += _linear(f"{p}.i2t.k", t, t, "base")
        specs += _linear(f"{p}.i2t.v", t, t, "base")
        specs += _linear(f"{p}.i2t.out", t, e, "base")
        specs += _norm(f"{p}.norm4", e, "base")
    specs += _conv("decoder.upscale.c1", (e, cfg.upscale_mid, 2, 2), cfg.upscale_mid, "base")
    specs += _conv("decoder.upscale.c2", (cfg.upscale_mid, mf, 2, 2), mf, "base")
    for j in range(cfg.num_mask_tokens):
        specs += _mlp3(f"decoder.mask_mlp{j}", t, t, mf, "base")
    specs += _mlp3("decoder.iou_mlp", t, t, cfg.num_mask_tokens, "base")

    specs.append(ParamSpec("hq.token", (1, t), "hq"))
    specs += _mlp3("hq.mlp", t, t, mf, "hq")
    for branch in ("early", "final"):
        specs += _conv(f"fusion.{branch}.c1", (e, cfg.fusion_mid, 2, 2), cfg.fusion_mid, "hq")
        specs += _conv(f"fusion.{branch}.c2", (cfg.fusion_mid, mf, 2, 2), mf, "hq")
    specs += _conv("fusion.maskfeat", (mf, mf, 3, 3), mf, "hq")
    return specs


def is_hq_parameter(name: str) -> bool:
    return name == "hq.token" or name.startswith("hq.mlp.") or name.startswith("fusion.")


def analytic_param_counts(cfg: ModelConfig) -> dict[str, int]:
    """Parameter-element totals by arithmetic on shapes alone."""
    total = 0
    hq = 0
    for spec in parameter_shapes(cfg):
        n = 1
        for d in spec.shape:
            n *= d
        total += n
        if spec.group == "hq":
            hq += n
    return {"total": total, "hq": hq, "base": total - hq}
