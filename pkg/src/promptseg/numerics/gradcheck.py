"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import NumericsError, Tensor, no_grad, precision_mode


@dataclass
class GradCheckEntry:
    """Worst-case relative error for one checked quantity."""

    name: str
    max_rel_err: float
    worst_index: tuple[int, ...]
    ok: bool


@dataclass
class GradCheckReport:
    tol: float
    eps: float
    entries: list[GradCheckEntry] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)

    def failing(self) -> list[str]:
        return [e.name for e in self.entries if not e.ok]

    def worst(self) -> GradCheckEntry:
        return max(self.entries, key=lambda e: e.max_rel_err)

    def summary(self) -> str:
        lines = [f"grad check (eps={self.eps:g}, tol={self.tol:g})"]
        for e in self.entries:
            status = "ok" if e.ok else "FAIL"
            lines.append(f"  {status:4s}  {e.name:40s}  max rel err {e.max_rel_err:.3e}")
        return "\n".join(lines)


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[tuple[str, Tensor]],
    eps: float = 1e-5,
    tol: float = 1e-4,
    raise_on_fail: bool = False,
) -> GradCheckReport:
    """Compare analytic gradients of scalar f() against central differences.

    Checks every element of every listed parameter: the analytic
    gradient from one backward pass must satisfy
    |analytic - fd| / max(1, |fd|) <= tol.  Requires verify64 mode; the
    quadratic truncation error of the central difference is otherwise
    swamped by float32 roundoff.
    """
    if precision_mode() != "verify64":
        raise NumericsError("grad_check requires the verify64 precision mode")
    for name, t in params:
        if t.data.dtype != np.float64:
            raise NumericsError(f"grad_check parameter {name!r} is not float64")
        t.grad = None
        t.requires_grad = True

    loss = f()
    if loss.size != 1:
        raise NumericsError("grad_check requires a scalar-valued function")
    loss.backward()
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in params
    }

    report = GradCheckReport(tol=tol, eps=eps)
    with no_grad():
        for name, t in params:
            flat = t.data.reshape(-1)
            fd = np.zeros_like(flat)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                hi = float(f().data)
                flat[i] = orig - eps
                lo = float(f().data)
                flat[i] = orig
                fd[i] = (hi - lo) / (2 * eps)
            a = analytic[name].reshape(-1)
            rel = np.abs(a - fd) / np.maximum(1.0, np.abs(fd))
            worst = int(np.argmax(rel)) if rel.size else 0
            entry = GradCheckEntry(
                name=name,
                max_rel_err=float(rel[worst]) if rel.size else 0.0,
                worst_index=tuple(np.unravel_index(worst, t.data.shape)) if rel.size else (),
                ok=bool(rel.size == 0 or rel[worst] <= tol),
            )
            report.entries.append(entry)
            if raise_on_fail and not entry.ok:
                raise NumericsError(
                    f"gradient check failed for {name!r}: rel err {entry.max_rel_err:.3e}"
                )
    return report
