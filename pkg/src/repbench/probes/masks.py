"""Spectral mask targets and mask-regression objectives."""

from __future__ import annotations

from itertools import permutations

import numpy as np

MASK_CAP = 1.0
MASK_EPS = 1e-8


def inpsm(mixture_frames, source_frames, cap: float = MASK_CAP,
          eps: float = MASK_EPS) -> np.ndarray:
    """Non-negative phase-sensitive mask target, clamped to [0, cap].

    Per bin: (|S| / |Y|) * cos(theta_S - theta_Y), computed as
    Re(S * conj(Y)) / max(|Y|, eps)^2 so zero bins are safe.
    """
    y = np.asarray(mixture_frames)
    s = np.asarray(source_frames)
    if y.shape != s.shape:
        raise ValueError("mixture/source framing mismatch")
    denom = np.maximum(np.abs(y), eps) ** 2
    mask = np.real(s * np.conj(y)) / denom
    return np.clip(mask, 0.0, cap)


def mask_mse(predicted, target) -> tuple[float, np.ndarray]:
    """Mean squared error over all bins and frames, with gradient."""
    pred = np.asarray(predicted, dtype=np.float64)
    tgt = np.asarray(target, dtype=np.float64)
    if pred.shape != tgt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {tgt.shape}")
    diff = pred - tgt
    loss = float(np.mean(diff * diff))
    grad = 2.0 * diff / diff.size
    return loss, grad


def pit_mask_mse(predicted, target) -> tuple[float, np.ndarray, tuple[int, ...]]:
    """Permutation-invariant mask MSE for [S, T, F] stacks.

    Returns (loss, gradient w.r.t. predictions, chosen speaker permutation).
    """
    pred = np.asarray(predicted, dtype=np.float64)
    tgt = np.asarray(target, dtype=np.float64)
    if pred.shape != tgt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {tgt.shape}")
    if pred.ndim != 3:
        raise ValueError("expected [num_sources, T, F] mask stacks")
    n_src = pred.shape[0]
    best = None
    for perm in permutations(range(n_src)):
        loss, grad = mask_mse(pred, tgt[list(perm)])
        if best is None or loss < best[0]:
            best = (loss, grad, perm)
    return best
