"""Central-finite-difference validation of the hand-written gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import Parameter


@dataclass
class BlockReport:
    name: str
    max_rel_err: float
    max_abs_analytic: float
    max_abs_numeric: float
    checked: int


@dataclass
class GradCheckReport:
    blocks: list[BlockReport] = field(default_factory=list)
    tolerance: float = 1e-5

    @property
    def max_rel_err(self) -> float:
        return max((b.max_rel_err for b in self.blocks), default=0.0)

    @property
    def failures(self) -> list[str]:
        return [b.name for b in self.blocks if b.max_rel_err > self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failures


ABS_FLOOR = 1e-3  # coords with |grad| below this are judged on an absolute scale


def _rel_err(analytic: float, numeric: float) -> float:
    # Mixed tolerance: relative where the gradient has magnitude, absolute
    # (scaled by the floor) where it is near zero and central differences
    # are dominated by float64 cancellation noise.
    denom = max(abs(analytic), abs(numeric), ABS_FLOOR)
    return abs(analytic - numeric) / denom


def grad_check(loss_fn, params: list[Parameter], eps: float = 1e-5,
               tolerance: float = 1e-5, max_coords: int | None = None,
               seed: int = 0) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    ``loss_fn()`` must recompute the loss from current parameter values and
    populate ``p.grad`` as a side effect (the probe's loss_and_grads).
    Parameters should be float64 for the stated tolerances to be
    meaningful. Large blocks can be spot-checked via ``max_coords``.
    """
    for p in params:
        p.grad[...] = 0.0
    loss_fn()
    analytic = [p.grad.copy() for p in params]

    rng = np.random.Generator(np.random.PCG64(seed))
    report = GradCheckReport(tolerance=tolerance)
    for p, grad in zip(params, analytic):
        flat_val = p.value.reshape(-1)
        flat_grad = grad.reshape(-1)
        coords = np.arange(flat_val.size)
        if max_coords is not None and flat_val.size > max_coords:
            coords = rng.choice(flat_val.size, size=max_coords, replace=False)
        max_rel = 0.0
        max_abs_a = 0.0
        max_abs_n = 0.0
        for c in coords:
            orig = flat_val[c]
            flat_val[c] = orig + eps
            for q in params:
                q.grad[...] = 0.0
            loss_plus = loss_fn()
            flat_val[c] = orig - eps
            for q in params:
                q.grad[...] = 0.0
            loss_minus = loss_fn()
            flat_val[c] = orig
            numeric = (loss_plus - loss_minus) / (2.0 * eps)
            max_rel = max(max_rel, _rel_err(float(flat_grad[c]), numeric))
            max_abs_a = max(max_abs_a, abs(float(flat_grad[c])))
            max_abs_n = max(max_abs_n, abs(numeric))
        report.blocks.append(BlockReport(p.name, max_rel, max_abs_a, max_abs_n,
                                         len(coords)))
    # Restore the analytic gradients for the caller.
    for p, grad in zip(params, analytic):
        p.grad[...] = grad
    return report
