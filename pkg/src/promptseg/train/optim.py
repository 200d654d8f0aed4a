"""Adam optimizer over Parameter objects (no weight decay)."""

from __future__ import annotations

import numpy as np

from ..numerics import Parameter


class Adam:
    def __init__(
        self,
        params: list[Parameter],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.tensor.data) for p in self.params]
        self._v = [np.zeros_like(p.tensor.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.tensor.grad = None

    def step(self, grad_scale: float = 1.0) -> None:
        """Apply one update; grad_scale averages accumulated batch gradients."""
        b1, b2 = self.betas
        self.t += 1
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self._m, self._v):
            if p.tensor.grad is None:
                continue
            g = p.tensor.grad.astype(np.float64) * grad_scale
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            update = self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            p.tensor.data = (p.tensor.data - update.astype(p.tensor.data.dtype)).astype(
                p.tensor.data.dtype
            )
