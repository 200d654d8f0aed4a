"""The segmentation network: miniature promptable backbone + decoder,
plus the high-quality refinement branch (observer token, dedicated
kernel MLP, global-local feature fusion) and logit-sum correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import numerics as N
from ..imaging import avg_pool, bilinear_resize
from ..masks import BinaryMask
from ..numerics import ParamStore, Tensor, trunc_normal
from .config import ModelConfig, is_hq_parameter, parameter_shapes
from .layers import CrossAttention, EncoderBlock, LayerNorm, Linear, Mlp2, Mlp3, TwoWayLayer
from .prompts import PromptError, PromptSet


@dataclass
class ImageEmbeddings:
    """Encoder taps: `early` after the first global-attention block,
    `final` after the last block; both (encoder_dim, G, G)."""

    early: Tensor
    final: Tensor


@dataclass
class TokenBundle:
    """Decoder token state in fixed concatenation order [hq | mask | iou | prompt]."""

    hq_token: Tensor
    mask_tokens: Tensor
    iou_token: Tensor
    prompt_tokens: Tensor

    def concat(self) -> Tensor:
        return N.concat([self.hq_token, self.mask_tokens, self.iou_token, self.prompt_tokens], axis=0)

    @property
    def rows(self) -> int:
        return 6 + self.prompt_tokens.shape[0]

    @staticmethod
    def split(tokens: Tensor) -> "TokenBundle":
        return TokenBundle(
            hq_token=tokens[0:1],
            mask_tokens=tokens[1:5],
            iou_token=tokens[5:6],
            prompt_tokens=tokens[6:],
        )


@dataclass
class MaskPrediction:
    sam_logits: np.ndarray  # (4, M, M)
    hq_logits: np.ndarray  # (1, M, M)
    corrected_logits: np.ndarray  # (1, M, M)
    iou_scores: np.ndarray  # (4,)
    selected: int
    full_res_mask: BinaryMask

    def branch_mask(self, branch: str, image_size: int) -> BinaryMask:
        """Full-resolution mask for one of the three output branches."""
        if branch == "sam":
            logits = self.sam_logits[self.selected]
        elif branch == "hq":
            logits = self.hq_logits[0]
        elif branch == "corrected":
            logits = self.corrected_logits[0]
        else:
            raise ValueError(f"unknown branch {branch!r}")
        up = bilinear_resize(logits.astype(np.float64), image_size, image_size)
        return BinaryMask(up > 0)


def _init_value(name: str, shape: tuple[int, ...], rng: np.random.Generator, cfg: ModelConfig):
    if name == "prompt.fourier":
        return np.random.default_rng(cfg.pe_seed).normal(0.0, 1.0, size=shape)
    if name == "hq.mlp.2.w":
        # zero-initialized final layer: the untrained refinement branch
        # is an exact no-op (corrected == base prediction)
        return np.zeros(shape)
    if name.endswith(".g"):
        return np.ones(shape)
    if name.endswith(".b"):
        return np.zeros(shape)
    return trunc_normal(rng, shape, std=0.02)


class SegModel:
    """Weights plus pure forward functions; safe to share across threads
    once constructed (inference never mutates parameters)."""

    def __init__(self, cfg: ModelConfig = ModelConfig(), seed: int = 0, store: ParamStore | None = None):
        self.cfg = cfg
        if store is None:
            store = ParamStore()
            rng = np.random.default_rng(seed)
            for spec in parameter_shapes(cfg):
                store.add(spec.name, _init_value(spec.name, spec.shape, rng, cfg))
        else:
            expected = [(s.name, s.shape) for s in parameter_shapes(cfg)]
            actual = [(p.name, p.tensor.shape) for p in store]
            if expected != actual:
                raise ValueError("parameter store does not match the model config")
        self.store = store
        self._bind_layers()

    def _bind_layers(self):
        cfg, store = self.cfg, self.store
        self.blocks = [
            EncoderBlock(store, f"encoder.block{i}", cfg, is_global=i in cfg.global_attn_blocks)
            for i in range(cfg.encoder_blocks)
        ]
        self.decoder_layers = [TwoWayLayer(store, f"decoder.layer{i}", cfg) for i in range(2)]
        self.mask_mlps = [Mlp3(store, f"decoder.mask_mlp{j}") for j in range(cfg.num_mask_tokens)]
        self.iou_mlp = Mlp3(store, "decoder.iou_mlp")
        self.hq_mlp = Mlp3(store, "hq.mlp")

    # -- persistence ----------------------------------------------------

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        N.save_checkpoint(path, self.store, self.cfg.to_dict(), extra=extra)

    @classmethod
    def from_checkpoint(cls, path: str | Path) -> "SegModel":
        header, store = N.load_checkpoint(path)
        cfg = ModelConfig.from_dict(header["config"])
        return cls(cfg, store=store)

    def load_weights(self, path: str | Path) -> dict:
        return N.load_params_into(path, self.store)

    # -- parameter accounting --------------------------------------------

    def count_parameters(self, which: str = "all") -> int:
        if which == "all":
            return self.store.count()
        if which == "trainable":
            return self.store.count(trainable_only=True)
        raise ValueError(f"unknown filter {which!r}")

    def hq_parameter_names(self) -> list[str]:
        return [p.name for p in self.store if is_hq_parameter(p.name)]

    def set_stage(self, stage: str) -> None:
        """'base': train everything except the HQ additions; 'hq': the reverse."""
        if stage == "base":
            self.store.set_trainable(lambda n: not is_hq_parameter(n))
        elif stage == "hq":
            self.store.set_trainable(is_hq_parameter)
        else:
            raise ValueError(f"unknown stage {stage!r}")

    # -- encoder ----------------------------------------------------------

    def encode_image(self, image: np.ndarray) -> ImageEmbeddings:
        cfg = self.cfg
        img = np.asarray(image, dtype=N.default_dtype())
        if img.shape != (3, cfg.image_size, cfg.image_size):
            raise ValueError(f"expected image (3, {cfg.image_size}, {cfg.image_size}), got {img.shape}")
        # [0,1] pixels standardized to mean 0.5 / std 0.5
        x = Tensor((img - 0.5) / 0.5)
        g = cfg.grid_side
        kernel = self.store["encoder.patch_embed.k"].tensor
        bias = self.store["encoder.patch_embed.b"].tensor
        emb = N.conv2d(x, kernel, stride=cfg.patch_size) + N.reshape(bias, (cfg.encoder_dim, 1, 1))
        tokens = N.transpose(N.reshape(emb, (cfg.encoder_dim, g * g)), (1, 0))
        tokens = tokens + self.store["encoder.pos_embed"].tensor

        early = None
        for i, block in enumerate(self.blocks):
            tokens = block(tokens)
            if i == cfg.early_tap_block:
                early = tokens
        assert early is not None

        def to_grid(t: Tensor) -> Tensor:
            return N.reshape(N.transpose(t, (1, 0)), (cfg.encoder_dim, g, g))

        return ImageEmbeddings(early=to_grid(early), final=to_grid(tokens))

    # -- prompt encoder -----------------------------------------------------

    def _fourier_pe(self, coords01: np.ndarray) -> np.ndarray:
        """(N,2) coords in [0,1] -> (N, token_dim) sin/cos features."""
        f = self.store["prompt.fourier"].tensor.data
        ang_x = 2.0 * math.pi * coords01[:, 0:1] * f[0][None, :]
        ang_y = 2.0 * math.pi * coords01[:, 1:2] * f[1][None, :]
        return np.concatenate([np.sin(ang_x), np.cos(ang_x), np.sin(ang_y), np.cos(ang_y)], axis=1)

    def embed_prompts(self, prompts: PromptSet) -> tuple[Tensor | None, Tensor]:
        cfg = self.cfg
        prompts.validate(cfg.image_size)
        s = float(cfg.image_size)
        rows: list[Tensor] = []
        if prompts.points:
            # pixel centers
            coords = np.array([[(p.x + 0.5) / s, (p.y + 0.5) / s] for p in prompts.points])
            pe = Tensor(self._fourier_pe(coords))
            labels = N.concat(
                [
                    N.reshape(
                        self.store[
                            "prompt.point_pos" if p.label == "positive" else "prompt.point_neg"
                        ].tensor,
                        (1, cfg.token_dim),
                    )
                    for p in prompts.points
                ],
                axis=0,
            )
            rows.append(pe + labels)
        if prompts.box is not None:
            b = prompts.box
            coords = np.array([[b.x0 / s, b.y0 / s], [b.x1 / s, b.y1 / s]])
            pe = Tensor(self._fourier_pe(coords))
            corners = N.concat(
                [
                    N.reshape(self.store["prompt.box_tl"].tensor, (1, cfg.token_dim)),
                    N.reshape(self.store["prompt.box_br"].tensor, (1, cfg.token_dim)),
                ],
                axis=0,
            )
            rows.append(pe + corners)
        sparse = N.concat(rows, axis=0) if rows else None

        g = cfg.grid_side
        if prompts.coarse_mask is not None:
            signed = np.where(prompts.coarse_mask.a, 1.0, -1.0)
            factor = cfg.image_size // (4 * g)
            small = avg_pool(signed, factor) if factor > 1 else signed
            h = Tensor(small[None, :, :])
            h = self._conv(h, "prompt.mask_down.c1", stride=2)
            h = N.gelu(h)
            h = self._conv(h, "prompt.mask_down.c2", stride=2)
            h = N.gelu(h)
            dense = self._conv(h, "prompt.mask_down.c3", stride=1)
        else:
            no_mask = N.reshape(self.store["prompt.no_mask"].tensor, (cfg.encoder_dim, 1, 1))
            dense = N.broadcast_to(no_mask, (cfg.encoder_dim, g, g))
        return sparse, dense

    def _conv(self, x: Tensor, name: str, stride: int, padding: int = 0) -> Tensor:
        k = self.store[f"{name}.k"].tensor
        b = self.store[f"{name}.b"].tensor
        out = N.conv2d(x, k, stride=stride, padding=padding)
        return out + N.reshape(b, (k.shape[0], 1, 1))

    def _deconv(self, x: Tensor, name: str) -> Tensor:
        k = self.store[f"{name}.k"].tensor
        b = self.store[f"{name}.b"].tensor
        out = N.transposed_conv2d(x, k, stride=2)
        return out + N.reshape(b, (k.shape[1], 1, 1))

    # -- decoder ------------------------------------------------------------

    def new_token_bundle(self, sparse: Tensor | None, extra_prompt_rows: Tensor | None = None) -> TokenBundle:
        cfg = self.cfg
        parts = []
        if sparse is not None:
            parts.append(sparse)
        if extra_prompt_rows is not None:
            parts.append(extra_prompt_rows)
        if not parts:
            # mask-only prompt: a learned pad row keeps the decoder shape valid
            parts.append(N.reshape(self.store["prompt.pad"].tensor, (1, cfg.token_dim)))
        prompt_tokens = parts[0] if len(parts) == 1 else N.concat(parts, axis=0)
        return TokenBundle(
            hq_token=self.store["hq.token"].tensor,
            mask_tokens=self.store["tokens.mask"].tensor,
            iou_token=self.store["tokens.iou"].tensor,
            prompt_tokens=prompt_tokens,
        )

    def _grid_image_pe(self) -> np.ndarray:
        """Positional map for the embedding grid, in the same Fourier
        basis as the prompt coordinates (tiled if the encoder is wider)."""
        cfg = self.cfg
        g = cfg.grid_side
        ys, xs = np.mgrid[0:g, 0:g]
        coords = np.stack([(xs.ravel() + 0.5) / g, (ys.ravel() + 0.5) / g], axis=1)
        pe = self._fourier_pe(coords)
        if cfg.encoder_dim != cfg.token_dim:
            if cfg.encoder_dim % cfg.token_dim:
                raise ValueError("encoder_dim must be a multiple of token_dim for the shared PE basis")
            pe = np.tile(pe, (1, cfg.encoder_dim // cfg.token_dim))
        return pe

    def decode_tokens(
        self, emb: ImageEmbeddings, dense: Tensor, bundle: TokenBundle
    ) -> tuple[TokenBundle, Tensor]:
        cfg = self.cfg
        g = cfg.grid_side
        if dense.shape != (cfg.encoder_dim, g, g):
            raise ValueError(f"dense embedding shape {dense.shape} mismatch")
        image = emb.final + dense
        image = N.transpose(N.reshape(image, (cfg.encoder_dim, g * g)), (1, 0))
        tokens = bundle.concat()
        token_pe = tokens  # initial embeddings double as positional queries/keys
        image_pe = Tensor(self._grid_image_pe())
        for layer in self.decoder_layers:
            tokens, image = layer(tokens, image, token_pe, image_pe, observer_rows=1)
        grid = N.reshape(N.transpose(image, (1, 0)), (cfg.encoder_dim, g, g))
        h = N.gelu(self._deconv(grid, "decoder.upscale.c1"))
        mask_feature = self._deconv(h, "decoder.upscale.c2")
        return TokenBundle.split(tokens), mask_feature

    def predict_sam_masks(self, bundle: TokenBundle, mask_feature: Tensor) -> tuple[Tensor, Tensor]:
        cfg = self.cfg
        m = cfg.mask_side
        kernels = N.concat(
            [self.mask_mlps[j](bundle.mask_tokens[j : j + 1]) for j in range(cfg.num_mask_tokens)],
            axis=0,
        )  # (4, mf)
        flat = N.reshape(mask_feature, (cfg.mask_feature_dim, m * m))
        logits = N.reshape(N.matmul(kernels, flat), (cfg.num_mask_tokens, m, m))
        iou = N.sigmoid(N.reshape(self.iou_mlp(bundle.iou_token), (cfg.num_mask_tokens,)))
        return logits, iou

    def fuse_hq_features(self, emb: ImageEmbeddings, mask_feature: Tensor) -> Tensor:
        cfg = self.cfg
        m = cfg.mask_side
        if mask_feature.shape != (cfg.mask_feature_dim, m, m):
            raise ValueError(f"mask feature must be {(cfg.mask_feature_dim, m, m)}, got {mask_feature.shape}")
        early = self._deconv(N.gelu(self._deconv(emb.early, "fusion.early.c1")), "fusion.early.c2")
        final = self._deconv(N.gelu(self._deconv(emb.final, "fusion.final.c1")), "fusion.final.c2")
        processed = self._conv(mask_feature, "fusion.maskfeat", stride=1, padding=1)
        return early + final + processed

    def predict_hq_mask(self, hq_token: Tensor, hq_feature: Tensor) -> Tensor:
        cfg = self.cfg
        m = cfg.mask_side
        kernel = self.hq_mlp(hq_token)  # (1, mf)
        flat = N.reshape(hq_feature, (cfg.mask_feature_dim, m * m))
        return N.reshape(N.matmul(kernel, flat), (1, m, m))

    # -- selection / correction ----------------------------------------------

    def select_and_correct(
        self,
        sam_logits: np.ndarray,
        iou_scores: np.ndarray,
        hq_logits: np.ndarray,
        single_mask: bool = False,
    ) -> MaskPrediction:
        """Pick the output head, sum logits for correction, upsample + threshold.

        single_mask pins the selection to head 0 (used for box prompts);
        otherwise the head with the best predicted IoU wins.
        """
        sam_logits = np.asarray(sam_logits)
        hq_logits = np.asarray(hq_logits)
        iou_scores = np.asarray(iou_scores)
        selected = 0 if single_mask else int(np.argmax(iou_scores))
        corrected = sam_logits[selected : selected + 1] + hq_logits
        up = bilinear_resize(corrected[0].astype(np.float64), self.cfg.image_size, self.cfg.image_size)
        return MaskPrediction(
            sam_logits=sam_logits,
            hq_logits=hq_logits,
            corrected_logits=corrected,
            iou_scores=iou_scores,
            selected=selected,
            full_res_mask=BinaryMask(up > 0),
        )

    # -- full pipeline ---------------------------------------------------------

    def forward(
        self,
        image: np.ndarray,
        prompts: PromptSet,
        with_hq: bool = True,
        extra_prompt_rows: Tensor | None = None,
    ) -> tuple[Tensor, Tensor, Tensor | None, ImageEmbeddings, TokenBundle]:
        """Graph-building full forward; returns (sam_logits, iou, hq_logits, embeddings, updated bundle).

        with_hq=False skips the fusion/refinement branch (its logits
        are returned as None); base-branch outputs never depend on it.
        """
        emb = self.encode_image(image)
        sparse, dense = self.embed_prompts(prompts)
        bundle = self.new_token_bundle(sparse, extra_prompt_rows=extra_prompt_rows)
        updated, mask_feature = self.decode_tokens(emb, dense, bundle)
        sam_logits, iou = self.predict_sam_masks(updated, mask_feature)
        if not with_hq:
            return sam_logits, iou, None, emb, updated
        hq_feature = self.fuse_hq_features(emb, mask_feature)
        hq_logits = self.predict_hq_mask(updated.hq_token, hq_feature)
        return sam_logits, iou, hq_logits, emb, updated

    def predict(
        self, image: np.ndarray, prompts: PromptSet, extra_prompt_rows: Tensor | None = None
    ) -> MaskPrediction:
        with N.no_grad():
            sam_logits, iou, hq_logits, _, _ = self.forward(
                image, prompts, extra_prompt_rows=extra_prompt_rows
            )
        return self.select_and_correct(
            sam_logits.data, iou.data, hq_logits.data, single_mask=prompts.box is not None
        )
