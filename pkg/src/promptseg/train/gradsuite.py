"""The gradient verification suite: every differentiable op plus the
full HQ training loss, checked against central finite differences in
verify64 mode."""

from __future__ import annotations

import numpy as np

from .. import numerics as N
from ..model import ModelConfig, SegModel, is_hq_parameter
from ..model.prompts import PromptSet
from ..numerics import GradCheckReport, Tensor, grad_check, precision
from ..promptgen import Box, LabeledPoint
from .loop import TrainConfig, stage2_sample_loss

# small enough that exhaustive per-element finite differences stay fast
TINY_CONFIG = ModelConfig(
    image_size=32,
    patch_size=8,
    encoder_dim=16,
    encoder_blocks=2,
    global_attn_blocks=(0,),
    token_dim=16,
    num_mask_tokens=4,
    mask_feature_dim=8,
    encoder_heads=2,
    decoder_heads=2,
    encoder_mlp_ratio=2,
    decoder_mlp_ratio=2,
    window_size=2,
)


def _t(rng: np.random.Generator, shape) -> Tensor:
    return Tensor(rng.normal(size=shape), requires_grad=True)


def op_reports(eps: float = 1e-5, tol: float = 1e-4, seed: int = 0) -> list[GradCheckReport]:
    """Finite-difference checks for each differentiable op in isolation."""
    reports = []
    with precision("verify64"):
        rng = np.random.default_rng(seed)

        cases = []
        a, b = _t(rng, (3, 4)), _t(rng, (4, 5))
        cases.append(("matmul", lambda: N.sum(N.matmul(a, b)), [("matmul.a", a), ("matmul.b", b)]))
        ab, bb = _t(rng, (2, 3, 4)), _t(rng, (2, 4, 5))
        cases.append(
            ("matmul_batched", lambda: N.sum(N.mul(N.matmul(ab, bb), N.matmul(ab, bb))), [("a", ab), ("b", bb)])
        )
        x = _t(rng, (3, 6))
        g_, be_ = _t(rng, (6,)), _t(rng, (6,))
        cln = Tensor(rng.normal(size=(3, 6)))
        cases.append(
            ("layer_norm", lambda: N.sum(N.mul(N.layer_norm(x, g_, be_, 1e-6), cln)), [("x", x), ("gamma", g_), ("beta", be_)])
        )
        q, k, v = _t(rng, (3, 8)), _t(rng, (5, 8)), _t(rng, (5, 8))
        cat = Tensor(rng.normal(size=(3, 8)))
        cases.append(("attention", lambda: N.sum(N.mul(N.attention(q, k, v), cat)), [("q", q), ("k", k), ("v", v)]))
        xs = _t(rng, (2, 7))
        csm = Tensor(rng.normal(size=(2, 7)))
        cases.append(("softmax", lambda: N.sum(N.mul(N.softmax(xs), csm)), [("x", xs)]))
        xg = _t(rng, (4, 5))
        cases.append(("gelu", lambda: N.sum(N.gelu(xg)), [("x", xg)]))
        xsg = _t(rng, (4, 5))
        csg = Tensor(rng.normal(size=(4, 5)))
        cases.append(("sigmoid", lambda: N.sum(N.mul(N.sigmoid(xsg), csg)), [("x", xsg)]))
        xl, wl, bl = _t(rng, (3, 4)), _t(rng, (4, 6)), _t(rng, (6,))
        cases.append(("linear", lambda: N.sum(N.mul(N.linear(xl, wl, bl), N.linear(xl, wl, bl))), [("x", xl), ("w", wl), ("b", bl)]))
        xc, kc = _t(rng, (3, 8, 8)), _t(rng, (5, 3, 2, 2))
        cases.append(("conv2d_stride", lambda: N.sum(N.mul(N.conv2d(xc, kc, stride=2), N.conv2d(xc, kc, stride=2))), [("x", xc), ("k", kc)]))
        x3, k3 = _t(rng, (3, 6, 6)), _t(rng, (4, 3, 3, 3))
        cases.append(
            ("conv2d_3x3", lambda: N.sum(N.mul(N.conv2d(x3, k3, stride=1, padding=1), N.conv2d(x3, k3, stride=1, padding=1))), [("x", x3), ("k", k3)])
        )
        xt, kt = _t(rng, (3, 5, 5)), _t(rng, (3, 4, 2, 2))
        cases.append(
            ("transposed_conv2d", lambda: N.sum(N.mul(N.transposed_conv2d(xt, kt, 2), N.transposed_conv2d(xt, kt, 2))), [("x", xt), ("k", kt)])
        )
        zb = _t(rng, (4, 4))
        tb = (rng.random((4, 4)) > 0.5).astype(np.float64)
        cases.append(("bce_with_logits", lambda: N.mean(N.bce_with_logits(zb, tb)), [("z", zb)]))
        xe = _t(rng, (3, 3))
        cases.append(("exp_log_div", lambda: N.sum(N.div(N.log(N.exp(xe) + 1.0), N.exp(xe))), [("x", xe)]))
        sa, sb = _t(rng, (3, 4)), _t(rng, (3, 4))
        cases.append(("sub", lambda: N.sum(N.mul(N.sub(sa, sb), N.sub(sa, sb))), [("a", sa), ("b", sb)]))
        sc = _t(rng, (2, 3))
        cases.append(("rsub_scalar", lambda: N.sum(N.mul(1.0 - sc, 1.0 - sc)), [("x", sc)]))
        xr = _t(rng, (2, 3, 4))
        cases.append(
            (
                "reshape_transpose_slice",
                lambda: N.sum(N.mul(N.transpose(xr, (1, 0, 2))[1:], N.transpose(xr, (1, 0, 2))[1:])),
                [("x", xr)],
            )
        )
        xbr = _t(rng, (3, 1))
        cbr = Tensor(rng.normal(size=(3, 7)))
        cases.append(
            ("broadcast_add", lambda: N.sum(N.mul(N.add(xbr, cbr), N.broadcast_to(xbr, (3, 7)))), [("x", xbr)])
        )

        for name, f, params in cases:
            rep = grad_check(f, params, eps=eps, tol=tol)
            for e in rep.entries:
                e.name = f"{name}.{e.name}"
            reports.append(rep)
    return reports


def hq_loss_report(eps: float = 1e-5, tol: float = 1e-4, seed: int = 0) -> GradCheckReport:
    """FD check of the full training loss w.r.t. every HQ parameter.

    Runs on a tiny config so exhaustive per-element differences finish
    in seconds; the op set and wiring are identical to the full model.
    """
    with precision("verify64"):
        model = SegModel(TINY_CONFIG, seed=seed)
        model.set_stage("hq")
        rng = np.random.default_rng(seed + 1)
        image = rng.random((3, TINY_CONFIG.image_size, TINY_CONFIG.image_size))
        prompts = PromptSet(
            points=[LabeledPoint(5.0, 6.0, "positive"), LabeledPoint(20.0, 9.0, "negative")],
            box=Box(4.0, 4.0, 28.0, 27.0),
        )
        from ..masks import BinaryMask

        gt = BinaryMask(rng.random((TINY_CONFIG.image_size, TINY_CONFIG.image_size)) > 0.5)
        cfg = TrainConfig.hq(seed=seed)
        # perturb the zero-initialized head so its gradient paths are active
        model.store["hq.mlp.2.w"].tensor.data += rng.normal(
            0, 0.02, size=model.store["hq.mlp.2.w"].tensor.shape
        )

        def f():
            loss, _ = stage2_sample_loss(model, image, prompts, gt, cfg)
            return loss

        params = [(p.name, p.tensor) for p in model.store if is_hq_parameter(p.name)]
        return grad_check(f, params, eps=eps, tol=tol)


def run_gradient_suite(eps: float = 1e-5, tol: float = 1e-4, seed: int = 0) -> tuple[bool, str]:
    reports = op_reports(eps=eps, tol=tol, seed=seed)
    reports.append(hq_loss_report(eps=eps, tol=tol, seed=seed))
    ok = all(r.ok for r in reports)
    lines = []
    for r in reports:
        worst = r.worst()
        status = "ok" if r.ok else "FAIL"
        lines.append(f"{status:4s} worst {worst.name:48s} rel err {worst.max_rel_err:.3e}")
    lines.append(f"gradient suite: {'PASS' if ok else 'FAIL'} (eps={eps:g}, tol={tol:g})")
    return ok, "\n".join(lines)
