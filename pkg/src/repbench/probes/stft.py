"""STFT / inverse STFT with weighted overlap-add synthesis.

Analysis: frames of ``n_fft`` samples every ``hop`` samples (no padding),
windowed and transformed with a one-sided FFT. Synthesis applies the
window again and normalizes by the summed squared-window profile, so
istft(stft(x)) reconstructs interior samples (one frame length in from
each edge) to float precision for any COLA-compliant window/hop pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..features import hann_periodic


class ColaError(ValueError):
    pass


@dataclass
class StftConfig:
    n_fft: int = 512
    hop: int = 256
    window: str = "hann"

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    def window_values(self) -> np.ndarray:
        if self.window == "hann":
            return hann_periodic(self.n_fft)
        if self.window == "sqrt_hann":
            return np.sqrt(hann_periodic(self.n_fft))
        raise ValueError(f"unknown window '{self.window}'")


def _overlap_profile(values: np.ndarray, hop: int) -> np.ndarray:
    """Interior overlap-add profile over one hop period."""
    acc = np.zeros(hop)
    for start in range(0, len(values), hop):
        seg = values[start:start + hop]
        acc[:len(seg)] += seg
    return acc


def check_cola(cfg: StftConfig, tol: float = 1e-8) -> None:
    """Reject window/hop pairs without constant interior overlap-add.

    Accepts pairs where either the window itself (plain overlap-add) or
    its square (the analysis*synthesis product used here) sums to a
    constant; both standard enhancement setups (hann and sqrt-hann at 50%
    overlap) qualify, while e.g. hann with a 300-sample hop does not.
    """
    if cfg.hop <= 0 or cfg.hop > cfg.n_fft:
        raise ColaError(f"hop {cfg.hop} incompatible with n_fft {cfg.n_fft}")
    w = cfg.window_values()
    flat = False
    for profile in (_overlap_profile(w, cfg.hop),
                    _overlap_profile(w * w, cfg.hop)):
        if np.max(profile) - np.min(profile) <= tol * np.max(profile):
            flat = True
    if not flat:
        raise ColaError(f"window '{cfg.window}' with hop {cfg.hop} is not "
                        "COLA-compliant")
    if np.min(_overlap_profile(w * w, cfg.hop)) <= 1e-10:
        raise ColaError("squared-window overlap vanishes; cannot invert")


def stft(waveform, cfg: StftConfig | None = None) -> np.ndarray:
    """Complex frames [T, n_fft//2 + 1]."""
    if cfg is None:
        cfg = StftConfig()
    check_cola(cfg)
    x = np.asarray(waveform, dtype=np.float64)
    if len(x) < cfg.n_fft:
        raise ValueError(f"waveform of {len(x)} samples shorter than one "
                         f"frame ({cfg.n_fft})")
    n_frames = (len(x) - cfg.n_fft) // cfg.hop + 1
    w = cfg.window_values()
    idx = np.arange(cfg.n_fft)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    return np.fft.rfft(x[idx] * w[None, :], axis=1)


def istft(frames, cfg: StftConfig | None = None, length: int | None = None) -> np.ndarray:
    """Weighted overlap-add inverse of :func:`stft`.

    Samples whose squared-window coverage falls below a quarter of the
    steady-state profile (the first and last partial-overlap regions) are
    zeroed: with modified (masked) spectra the normalization there would
    amplify frame-edge energy unboundedly.
    """
    if cfg is None:
        cfg = StftConfig()
    check_cola(cfg)
    frames = np.asarray(frames)
    n_frames = frames.shape[0]
    total = cfg.n_fft + cfg.hop * (n_frames - 1)
    acc = np.zeros(total)
    norm = np.zeros(total)
    w = cfg.window_values()
    segs = np.fft.irfft(frames, n=cfg.n_fft, axis=1)
    for t in range(n_frames):
        start = t * cfg.hop
        acc[start:start + cfg.n_fft] += segs[t] * w
        norm[start:start + cfg.n_fft] += w * w
    valid = norm >= 0.25 * norm.max()
    out = np.where(valid, acc / np.maximum(norm, 1e-12), 0.0)
    if length is not None:
        if length > total:
            out = np.concatenate([out, np.zeros(length - total)])
        else:
            out = out[:length]
    return out


def frame_energy(frames) -> float:
    """Total signal energy of the windowed frames via Parseval.

    One-sided spectra double every bin except DC and (for even n_fft)
    Nyquist; the result equals sum((w*x_frame)^2) over all frames.
    """
    frames = np.asarray(frames)
    n_fft = 2 * (frames.shape[1] - 1)
    mag2 = np.abs(frames) ** 2
    twosided = 2.0 * mag2.sum() - mag2[:, 0].sum() - mag2[:, -1].sum()
    return float(twosided / n_fft)


def apply_mask(mask, mixture_frames) -> np.ndarray:
    """Scale mixture magnitudes by a non-negative mask, keeping phase."""
    return np.asarray(mask) * np.asarray(mixture_frames)
