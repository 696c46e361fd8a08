"""Dataset manifests, task definitions, and a synthetic corpus generator.

Manifests are line-delimited JSON, one utterance per line, with the fixed
key set::

    {"id","audio","sr","n","speaker","text","score","split",
     "clean","noisy","src1","src2","mix"}

Optional keys are omitted when absent; unknown keys are preserved verbatim.
An optional first line carrying ``"__header__"`` stores provenance (seed,
policy, generator settings) and is kept separate from the utterance list.

The synthetic generator produces desk-scale corpora for all four task
kinds without any external datasets: token identities and speakers are
rendered as distinct tones, so spectral features are informative by
construction while random features are not.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .audio import float_to_int16, int16_to_float, write_wav_int16, read_wav

TASK_KINDS = ("ASR", "SID", "SE", "SS")

# Canonical key order for saved manifests (round-trip normalization).
_FIELD_ORDER = ["id", "audio", "sr", "n", "speaker", "text", "score", "split",
                "clean", "noisy", "src1", "src2", "mix"]

_REQUIRED_BY_KIND = {
    "ASR": ("text",),
    "SID": ("speaker",),
    "SE": ("clean", "noisy"),
    "SS": ("src1", "src2", "mix"),
}


class ManifestError(ValueError):
    """Raised on malformed manifests; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass
class Utterance:
    id: str
    sr: int
    n: int
    split: str
    audio: str | None = None
    speaker: str | None = None
    text: str | None = None
    score: float | None = None
    clean: str | None = None
    noisy: str | None = None
    src1: str | None = None
    src2: str | None = None
    mix: str | None = None
    extras: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        rec = {}
        for key in _FIELD_ORDER:
            val = getattr(self, key)
            if val is not None:
                rec[key] = val
        for key in sorted(self.extras):
            rec[key] = self.extras[key]
        return rec

    @classmethod
    def from_record(cls, rec: dict, line: int | None = None) -> "Utterance":
        known = {k: rec[k] for k in _FIELD_ORDER if k in rec}
        extras = {k: v for k, v in rec.items() if k not in _FIELD_ORDER}
        for req in ("id", "sr", "n", "split"):
            if req not in known:
                raise ManifestError(f"missing required field '{req}'", line)
        utt = cls(**known, extras=extras)
        if utt.n <= 0:
            raise ManifestError(f"utterance '{utt.id}': n must be > 0", line)
        if utt.sr <= 0:
            raise ManifestError(f"utterance '{utt.id}': sr must be > 0", line)
        return utt

    def duration(self) -> float:
        return self.n / self.sr


@dataclass
class Manifest:
    utterances: list[Utterance]
    header: dict | None = None

    def __len__(self) -> int:
        return len(self.utterances)

    def __iter__(self):
        return iter(self.utterances)

    def ids(self) -> list[str]:
        return [u.id for u in self.utterances]

    def validate(self, kind: str | None = None) -> None:
        seen = set()
        for i, utt in enumerate(self.utterances):
            if utt.id in seen:
                raise ManifestError(f"duplicate id '{utt.id}'", i + 1)
            seen.add(utt.id)
        if kind is not None:
            if kind not in TASK_KINDS:
                raise ManifestError(f"unknown task kind '{kind}'")
            for i, utt in enumerate(self.utterances):
                for fieldname in _REQUIRED_BY_KIND[kind]:
                    if getattr(utt, fieldname) is None:
                        raise ManifestError(
                            f"utterance '{utt.id}' missing field '{fieldname}' "
                            f"required for task kind {kind}", i + 1)


def load_manifest(path, kind: str | None = None) -> Manifest:
    """Load and validate a JSONL manifest.

    ``kind``, when given, enforces the task's required per-utterance fields
    (ASR: text, SID: speaker, SE: clean/noisy, SS: src1/src2/mix).
    """
    path = Path(path)
    utterances: list[Utterance] = []
    header = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON ({exc.msg})", lineno) from exc
            if "__header__" in rec:
                if header is not None:
                    raise ManifestError("duplicate manifest header", lineno)
                header = rec
                continue
            utterances.append(Utterance.from_record(rec, lineno))
    manifest = Manifest(utterances, header=header)
    # Re-validate with line numbers that match utterance order, not file order,
    # since header lines were skipped.
    try:
        manifest.validate(kind)
    except ManifestError:
        raise
    return manifest


def save_manifest(manifest: Manifest, path) -> None:
    """Write a manifest in canonical key order (diff-friendly, stable bytes)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        if manifest.header is not None:
            fh.write(json.dumps(manifest.header, sort_keys=True,
                                separators=(",", ":")) + "\n")
        for utt in manifest.utterances:
            fh.write(json.dumps(utt.to_record(), separators=(",", ":")) + "\n")


@dataclass
class TaskSpec:
    """A benchmark task: manifests, sampling policy, probe, and metrics."""

    kind: str
    name: str
    train: str
    dev: str
    test: str
    sampling_policy: dict = field(default_factory=lambda: {"variant": "identity"})
    probe: dict = field(default_factory=dict)
    train_steps: int = 1000
    metric_ids: list[str] = field(default_factory=list)

    def validate(self) -> None:
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind '{self.kind}'")
        if self.train_steps <= 0:
            raise ValueError("train_steps must be > 0")


# ---------------------------------------------------------------------------
# Synthetic corpora
# ---------------------------------------------------------------------------

@dataclass
class SynthSpec:
    """Deterministic synthetic corpus description.

    Tokens and speakers map to fixed tone frequencies; SE adds white noise
    at a per-utterance SNR drawn from ``noise_db_range``; SS mixes two
    speakers at a relative level drawn from ``mix_db_range``. Token
    ``content`` is either pure tones or band-limited noise bursts (the
    latter gives dense spectra, useful for mask-prediction tasks).
    """

    kind: str
    seed: int = 0
    sample_rate: int = 16000
    counts: dict = field(default_factory=lambda: {"train": 24, "dev": 8, "test": 8})
    vocab_size: int = 4
    num_speakers: int = 3
    utt_len_range: tuple[int, int] = (8000, 16000)
    tokens_range: tuple[int, int] = (2, 5)
    token_len: int = 1600
    content: str = "tones"
    noise_db_range: tuple[float, float] = (5.0, 25.0)
    mix_db_range: tuple[float, float] = (0.0, 20.0)
    mix_gain_override: float | None = None
    amplitude: float = 0.3
    snr_cap_db: float = 100.0

    def validate(self) -> None:
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind '{self.kind}'")
        if self.kind in ("SID", "SS") and self.num_speakers < (2 if self.kind == "SS" else 1):
            raise ValueError(f"{self.kind} needs at least "
                             f"{2 if self.kind == 'SS' else 1} speakers")
        if self.kind == "ASR" and self.vocab_size < 1:
            raise ValueError("ASR needs vocab_size >= 1")
        if self.utt_len_range[0] > self.utt_len_range[1] or self.utt_len_range[0] <= 0:
            raise ValueError("bad utt_len_range")


def token_frequency(index: int) -> float:
    """Tone frequency for vocabulary token ``index`` (geometric spacing)."""
    return 350.0 * (1.22 ** index)


def speaker_frequency(index: int) -> float:
    """Fundamental frequency for synthetic speaker ``index``."""
    return 130.0 * (1.35 ** index)


def _tone(freq: float, n: int, sr: int, phase: float, amp: float) -> np.ndarray:
    t = np.arange(n, dtype=np.float64) / sr
    return amp * np.sin(2.0 * math.pi * freq * t + phase)


def _speaker_voice(spk: int, n: int, sr: int, rng: np.random.Generator,
                   amp: float) -> np.ndarray:
    """Harmonic stack at the speaker's fundamental; spectral shape is the ID cue."""
    f0 = speaker_frequency(spk)
    wave = np.zeros(n, dtype=np.float64)
    for m, gain in ((1, 1.0), (2, 0.5), (3, 0.25)):
        wave += gain * _tone(f0 * m, n, sr, rng.uniform(0, 2 * math.pi), 1.0)
    wave *= amp / np.max(np.abs(wave))
    return wave


def _token_band_noise(tok: int, spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """Noise burst spectrally shaped around the token's center frequency."""
    n = spec.token_len
    center = token_frequency(tok)
    white = rng.standard_normal(n)
    freqs = np.fft.rfftfreq(n, 1.0 / spec.sample_rate)
    bump = np.exp(-0.5 * ((freqs - center) / (center / 6.0)) ** 2)
    shaped = np.fft.irfft(np.fft.rfft(white) * bump, n=n)
    rms = math.sqrt(float(np.mean(shaped ** 2)))
    return shaped * (spec.amplitude / math.sqrt(2.0) / max(rms, 1e-12))


def _token_speech(tokens: list[int], spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.content == "bands":
        segs = [_token_band_noise(tok, spec, rng) for tok in tokens]
    else:
        segs = [_tone(token_frequency(tok), spec.token_len, spec.sample_rate,
                      rng.uniform(0, 2 * math.pi), spec.amplitude)
                for tok in tokens]
    wave = np.concatenate(segs)
    wave += 0.005 * rng.standard_normal(wave.shape)
    return wave


def segmental_snr(noisy: np.ndarray, clean: np.ndarray, seg: int = 512,
                  floor_db: float = -10.0, ceil_db: float = 35.0) -> float:
    """Mean per-segment SNR in dB, each segment clipped to [floor, ceil]."""
    n = min(len(noisy), len(clean))
    n -= n % seg
    if n == 0:
        raise ValueError("signals shorter than one segment")
    c = clean[:n].reshape(-1, seg)
    e = (noisy[:n] - clean[:n]).reshape(-1, seg)
    num = np.sum(c * c, axis=1)
    den = np.sum(e * e, axis=1)
    with np.errstate(divide="ignore"):
        snr = 10.0 * np.log10(num / np.maximum(den, 1e-30))
    return float(np.mean(np.clip(snr, floor_db, ceil_db)))


def power_ratio_db(a: np.ndarray, b: np.ndarray, cap_db: float) -> float:
    pa = float(np.mean(a.astype(np.float64) ** 2))
    pb = float(np.mean(b.astype(np.float64) ** 2))
    if pb <= 0.0:
        return cap_db
    if pa <= 0.0:
        return -cap_db
    return float(np.clip(10.0 * math.log10(pa / pb), -cap_db, cap_db))


def synthesize_corpus(spec: SynthSpec, out_dir) -> dict[str, Manifest]:
    """Generate audio + manifests for one task; returns manifests per split.

    Fully deterministic given ``spec`` (including seed): two calls produce
    byte-identical wav files and manifests.
    """
    spec.validate()
    out_dir = Path(out_dir)
    audio_dir = out_dir / "audio"
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    sr = spec.sample_rate

    manifests: dict[str, Manifest] = {}
    for split in ("train", "dev", "test"):
        count = int(spec.counts.get(split, 0))
        utts: list[Utterance] = []
        for i in range(count):
            uid = f"{spec.kind.lower()}_{split}_{i:04d}"
            if spec.kind == "ASR":
                utts.append(_synth_asr(uid, split, spec, rng, audio_dir))
            elif spec.kind == "SID":
                utts.append(_synth_sid(uid, split, i, spec, rng, audio_dir))
            elif spec.kind == "SE":
                utts.append(_synth_se(uid, split, spec, rng, audio_dir))
            else:
                utts.append(_synth_ss(uid, split, spec, rng, audio_dir))
        header = {
            "__header__": "synthetic-corpus",
            "kind": spec.kind,
            "seed": spec.seed,
            "split": split,
            "prng": "pcg64",
            "spec": {k: v for k, v in asdict(spec).items()},
        }
        manifest = Manifest(utts, header=header)
        manifest.validate(spec.kind)
        manifests[split] = manifest
        save_manifest(manifest, out_dir / f"{split}.jsonl")
    return manifests


def _synth_asr(uid, split, spec, rng, audio_dir) -> Utterance:
    n_tok = int(rng.integers(spec.tokens_range[0], spec.tokens_range[1] + 1))
    tokens = [int(rng.integers(0, spec.vocab_size)) for _ in range(n_tok)]
    wave = _token_speech(tokens, spec, rng)
    rel = f"audio/{uid}.wav"
    write_wav_int16(audio_dir / f"{uid}.wav", float_to_int16(wave), spec.sample_rate)
    return Utterance(id=uid, audio=rel, sr=spec.sample_rate, n=len(wave),
                     split=split, text=" ".join(f"w{t}" for t in tokens))


def _synth_sid(uid, split, index, spec, rng, audio_dir) -> Utterance:
    spk = index % spec.num_speakers
    n = int(rng.integers(spec.utt_len_range[0], spec.utt_len_range[1] + 1))
    wave = _speaker_voice(spk, n, spec.sample_rate, rng, spec.amplitude)
    wave += 0.01 * rng.standard_normal(n)
    rel = f"audio/{uid}.wav"
    write_wav_int16(audio_dir / f"{uid}.wav", float_to_int16(wave), spec.sample_rate)
    return Utterance(id=uid, audio=rel, sr=spec.sample_rate, n=n,
                     split=split, speaker=f"spk{spk}")


def _synth_se(uid, split, spec, rng, audio_dir) -> Utterance:
    n_tok = int(rng.integers(spec.tokens_range[0], spec.tokens_range[1] + 1))
    tokens = [int(rng.integers(0, spec.vocab_size)) for _ in range(n_tok)]
    clean = _token_speech(tokens, spec, rng)
    snr_db = rng.uniform(*spec.noise_db_range)
    clean_power = float(np.mean(clean ** 2))
    noise = rng.standard_normal(len(clean))
    noise *= math.sqrt(clean_power / (10.0 ** (snr_db / 10.0)) / np.mean(noise ** 2))

    # Quantize clean and noise separately, add in the integer domain so the
    # stored pair is exactly noisy = clean + noise.
    clean_i = float_to_int16(clean)
    noise_i = float_to_int16(noise)
    noisy_i = (clean_i.astype(np.int32) + noise_i.astype(np.int32)).astype(np.int16)
    write_wav_int16(audio_dir / f"{uid}.clean.wav", clean_i, spec.sample_rate)
    write_wav_int16(audio_dir / f"{uid}.noisy.wav", noisy_i, spec.sample_rate)
    score = segmental_snr(int16_to_float(noisy_i), int16_to_float(clean_i))
    return Utterance(id=uid, audio=f"audio/{uid}.noisy.wav", sr=spec.sample_rate,
                     n=len(clean_i), split=split, score=round(score, 4),
                     clean=f"audio/{uid}.clean.wav", noisy=f"audio/{uid}.noisy.wav")


def _synth_ss(uid, split, spec, rng, audio_dir) -> Utterance:
    n = int(rng.integers(spec.utt_len_range[0], spec.utt_len_range[1] + 1))
    spk_a = int(rng.integers(0, spec.num_speakers))
    spk_b = (spk_a + 1 + int(rng.integers(0, spec.num_speakers - 1))) % spec.num_speakers
    src1 = _speaker_voice(spk_a, n, spec.sample_rate, rng, spec.amplitude)
    src2 = _speaker_voice(spk_b, n, spec.sample_rate, rng, spec.amplitude)
    if spec.mix_gain_override is not None:
        src2 *= spec.mix_gain_override
    else:
        rel_db = rng.uniform(*spec.mix_db_range)
        p1 = float(np.mean(src1 ** 2))
        p2 = float(np.mean(src2 ** 2))
        src2 *= math.sqrt(p1 / (10.0 ** (rel_db / 10.0)) / max(p2, 1e-30))

    src1_i = float_to_int16(src1)
    src2_i = float_to_int16(src2)
    mix_i = (src1_i.astype(np.int32) + src2_i.astype(np.int32)).astype(np.int16)
    for tag, ints in (("src1", src1_i), ("src2", src2_i), ("mix", mix_i)):
        write_wav_int16(audio_dir / f"{uid}.{tag}.wav", ints, spec.sample_rate)
    score = power_ratio_db(int16_to_float(src1_i), int16_to_float(src2_i),
                           spec.snr_cap_db)
    return Utterance(id=uid, audio=f"audio/{uid}.mix.wav", sr=spec.sample_rate,
                     n=n, split=split, score=round(score, 4),
                     src1=f"audio/{uid}.src1.wav", src2=f"audio/{uid}.src2.wav",
                     mix=f"audio/{uid}.mix.wav")


def resolve_audio(manifest_path, ref: str) -> Path:
    """Resolve an audio reference relative to its manifest's directory."""
    p = Path(ref)
    if p.is_absolute():
        return p
    return Path(manifest_path).parent / p


def load_audio(manifest_path, ref: str) -> tuple[np.ndarray, int]:
    return read_wav(resolve_audio(manifest_path, ref))
