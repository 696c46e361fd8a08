"""Alignment-free sequence loss over blank-augmented paths.

The loss is the negative log of the total probability, over all frame
alignments that collapse to the label (repeats merged, blanks removed),
computed with the standard forward dynamic program in log space. The
gradient w.r.t. the per-frame log-probabilities is exact, obtained from
forward/backward state occupancies; label sequences needing more frames
than available (each symbol plus a separating blank between repeated
symbols) are infeasible and yield +inf loss with a zero gradient.

Blank is class index 0 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BLANK = 0
NEG_INF = -np.inf


@dataclass
class CtcResult:
    loss: float
    grad: np.ndarray  # d(loss)/d(log_probs), same shape as the input
    feasible: bool


def min_frames(labels: list[int]) -> int:
    """Shortest alignment: one frame per symbol plus blanks between repeats."""
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    return len(labels) + repeats


def _extend(labels: list[int]) -> np.ndarray:
    ext = np.full(2 * len(labels) + 1, BLANK, dtype=np.int64)
    ext[1::2] = labels
    return ext


def ctc_loss(log_probs, labels: list[int]) -> CtcResult:
    """Loss and exact gradient for one utterance.

    ``log_probs`` is [T, V] of per-frame log class scores (normally
    log-softmax outputs; the gradient treats entries as free variables).
    """
    lp = np.asarray(log_probs, dtype=np.float64)
    if lp.ndim != 2:
        raise ValueError("log_probs must be [T, V]")
    T, V = lp.shape
    labels = [int(x) for x in labels]
    if any(not (1 <= x < V) for x in labels):
        raise ValueError(f"labels must lie in [1, {V}) (0 is blank)")

    if min_frames(labels) > T:
        return CtcResult(float("inf"), np.zeros_like(lp), feasible=False)

    ext = _extend(labels)
    S = len(ext)
    # skip transition s-2 -> s allowed when s is a label differing from s-2
    can_skip = np.zeros(S, dtype=bool)
    for s in range(2, S):
        can_skip[s] = ext[s] != BLANK and ext[s] != ext[s - 2]

    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = lp[0, ext[0]]
    if S > 1:
        alpha[0, 1] = lp[0, ext[1]]
    for t in range(1, T):
        prev = alpha[t - 1]
        cur = prev.copy()
        cur[1:] = np.logaddexp(cur[1:], prev[:-1])
        skip = np.where(can_skip[2:], prev[:-2], NEG_INF)
        cur[2:] = np.logaddexp(cur[2:], skip)
        alpha[t] = cur + lp[t, ext]

    log_p = np.logaddexp(alpha[T - 1, S - 1],
                         alpha[T - 1, S - 2] if S > 1 else NEG_INF)
    if not np.isfinite(log_p):
        # Numerically impossible alignment (e.g. hard-zero probabilities).
        return CtcResult(float("inf"), np.zeros_like(lp), feasible=False)

    beta = np.full((T, S), NEG_INF)
    beta[T - 1, S - 1] = lp[T - 1, ext[S - 1]]
    if S > 1:
        beta[T - 1, S - 2] = lp[T - 1, ext[S - 2]]
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1]
        cur = nxt.copy()
        cur[:-1] = np.logaddexp(cur[:-1], nxt[1:])
        skip = np.where(can_skip[2:], nxt[2:], NEG_INF)
        cur[:-2] = np.logaddexp(cur[:-2], skip)
        beta[t] = cur + lp[t, ext]

    # State occupancy; alpha and beta both include the emission at t.
    occupancy = alpha + beta - lp[:, ext] - log_p
    grad = np.zeros_like(lp)
    with np.errstate(under="ignore"):
        post = np.exp(occupancy)
    for s in range(S):
        grad[:, ext[s]] -= post[:, s]
    return CtcResult(float(-log_p), grad, feasible=True)


def ctc_greedy_decode(log_probs) -> list[int]:
    """Best-path decoding: framewise argmax, merge repeats, drop blanks."""
    path = np.argmax(np.asarray(log_probs), axis=1)
    out: list[int] = []
    prev = -1
    for p in path:
        if p != prev and p != BLANK:
            out.append(int(p))
        prev = p
    return out
