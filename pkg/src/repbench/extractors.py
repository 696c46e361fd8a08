"""Feature extractor families for desk-scale runs.

Three built-in families stand in for upstream models:

* ``fbank``: single-layer log-mel features (the non-learned baseline)
* ``spectral``: multi-layer informative features; layer 0 is FBANK and
  further layers are deterministic transforms of it (temporal deltas and
  local smoothing), so all layers carry signal
* ``noise``: utterance-seeded Gaussian features of matching shape,
  deterministic but carrying no information about the audio

All families share the task's analysis framing so cached features align
frame-for-frame with spectral mask targets where needed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .features import FbankParams, FeatureRecord, extract_fbank, frame_count


def stable_seed(*parts) -> int:
    """64-bit seed derived from string parts; stable across runs/platforms."""
    blob = ":".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little")


@dataclass
class ExtractorSpec:
    kind: str  # fbank | spectral | noise
    layers: int = 3
    n_mels: int = 40
    cmvn: bool = True
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "ExtractorSpec":
        spec = cls(**{k: v for k, v in d.items()
                      if k in ("kind", "layers", "n_mels", "cmvn", "seed")})
        if spec.kind not in ("fbank", "spectral", "noise"):
            raise ValueError(f"unknown extractor kind '{spec.kind}'")
        if spec.layers < 1:
            raise ValueError("layers must be >= 1")
        return spec


class Extractor:
    """Maps a waveform to a multi-layer FeatureRecord."""

    def __init__(self, spec: ExtractorSpec, win_ms: float, hop_ms: float,
                 cmvn_override: bool | None = None):
        self.spec = spec
        self.win_ms = win_ms
        self.hop_ms = hop_ms
        cmvn = spec.cmvn if cmvn_override is None else cmvn_override
        self.fbank_params = FbankParams(n_mels=spec.n_mels, win_ms=win_ms,
                                        hop_ms=hop_ms, cmvn=cmvn)

    @property
    def num_layers(self) -> int:
        return 1 if self.spec.kind == "fbank" else self.spec.layers

    @property
    def dim(self) -> int:
        return self.spec.n_mels

    def fingerprint(self) -> str:
        params = (self.spec.kind, self.spec.layers, self.spec.n_mels,
                  self.fbank_params.cmvn, self.spec.seed,
                  self.win_ms, self.hop_ms)
        return hashlib.sha256(repr(params).encode()).hexdigest()[:16]

    def extract(self, waveform, sample_rate: int, utt_id: str) -> FeatureRecord:
        if self.spec.kind == "fbank":
            return extract_fbank(waveform, sample_rate, self.fbank_params, utt_id)
        if self.spec.kind == "spectral":
            base = extract_fbank(waveform, sample_rate, self.fbank_params,
                                 utt_id).data[0].astype(np.float64)
            layers = [base]
            prev = base
            for i in range(1, self.spec.layers):
                if i % 2 == 1:
                    nxt = np.zeros_like(prev)
                    nxt[1:] = prev[1:] - prev[:-1]
                else:
                    nxt = prev.copy()
                    nxt[1:-1] = (prev[:-2] + prev[1:-1] + prev[2:]) / 3.0
                layers.append(nxt)
                prev = nxt
            return FeatureRecord(utt_id, np.stack(layers).astype(np.float32))
        # noise
        win = int(round(self.win_ms * sample_rate / 1000.0))
        hop = int(round(self.hop_ms * sample_rate / 1000.0))
        t = frame_count(len(waveform), win, hop)
        rng = np.random.Generator(np.random.PCG64(
            stable_seed("noise-extractor", self.spec.seed, utt_id)))
        data = rng.standard_normal((self.spec.layers, t, self.spec.n_mels))
        return FeatureRecord(utt_id, data.astype(np.float32))
