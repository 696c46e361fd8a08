"""Offline feature extraction, binary feature cache, pooling, storage accounting.

Cache record layout (little-endian, 19-byte header)::

    magic   4 bytes  b"MSPB"
    version u32      1
    dtype   u8       0 = float32
    L       u16      number of layers
    T       u32      frames
    D       u32      feature dimension
    payload L*T*D float32, layer-major then frame-major ([L][T][D])

Records are appended to a cache file; a JSONL index maps utterance id to
``{"id","file","offset","len"}``. Write -> read round trips are bit-exact.

FBANK algorithm (mirrored bit-for-bit by external exporters):
periodic Hann window, frame = floor((n - win) / hop) + 1 frames with no
padding, FFT size = next power of two >= window length, HTK mel scale
``2595 * log10(1 + f/700)`` with unnormalized peak-1 triangular filters
from 0 Hz to Nyquist, natural log with floor 1e-10, computed in float64
and stored as float32. CMVN (per-dimension zero mean / unit variance over
the utterance) is a toggle: on by default, off for speaker-ID caches.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"MSPB"
FORMAT_VERSION = 1
DTYPE_F32 = 0
_HEADER = struct.Struct("<4sIBHII")
HEADER_BYTES = _HEADER.size  # 19

LAYERNORM_EPS = 1e-5
LOG_FLOOR = 1e-10
CMVN_EPS = 1e-8


class CacheFormatError(ValueError):
    pass


@dataclass
class FeatureRecord:
    """Multi-layer framewise features, shape [L, T, D] float32."""

    utt_id: str
    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 3:
            raise ValueError("feature data must be [L, T, D]")
        if min(self.data.shape) < 1:
            raise ValueError("L, T, D must all be >= 1")
        if not np.all(np.isfinite(self.data)):
            raise ValueError(f"non-finite values in record '{self.utt_id}'")

    @property
    def num_layers(self) -> int:
        return self.data.shape[0]

    @property
    def num_frames(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]


@dataclass
class PooledRecord:
    """Time-pooled features, shape [L, D] float32."""

    utt_id: str
    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ValueError("pooled data must be [L, D]")

    @property
    def num_layers(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def as_record(self) -> FeatureRecord:
        """View as a T=1 framewise record (shared storage format)."""
        return FeatureRecord(self.utt_id, self.data[:, None, :])


# ---------------------------------------------------------------------------
# FBANK
# ---------------------------------------------------------------------------

@dataclass
class FbankParams:
    n_mels: int = 40
    win_ms: float = 25.0
    hop_ms: float = 10.0
    cmvn: bool = True


def frame_count(num_samples: int, win: int, hop: int) -> int:
    """Number of analysis frames; raises if shorter than one window."""
    if num_samples < win:
        raise ValueError(f"waveform of {num_samples} samples shorter than "
                         f"one window ({win})")
    return (num_samples - win) // hop + 1


def hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular mel filters [n_mels, n_fft//2 + 1], peak 1, 0 Hz..Nyquist."""
    n_bins = n_fft // 2 + 1
    fft_freqs = np.arange(n_bins, dtype=np.float64) * sample_rate / n_fft
    mel_pts = np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0), n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    fb = np.zeros((n_mels, n_bins), dtype=np.float64)
    for m in range(n_mels):
        lo, mid, hi = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        up = (fft_freqs - lo) / max(mid - lo, 1e-12)
        down = (hi - fft_freqs) / max(hi - mid, 1e-12)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


def extract_fbank(waveform, sample_rate: int, params: FbankParams | None = None,
                  utt_id: str = "") -> FeatureRecord:
    """Log-mel energies as a single-layer FeatureRecord.

    With ``params.cmvn`` the features are standardized per dimension over
    the utterance (zero mean, unit variance).
    """
    if params is None:
        params = FbankParams()
    wave = np.asarray(waveform, dtype=np.float64)
    win = int(round(params.win_ms * sample_rate / 1000.0))
    hop = int(round(params.hop_ms * sample_rate / 1000.0))
    n_frames = frame_count(len(wave), win, hop)
    n_fft = _next_pow2(win)
    window = hann_periodic(win)
    fb = mel_filterbank(params.n_mels, n_fft, sample_rate)

    idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = wave[idx] * window[None, :]
    spec = np.abs(np.fft.rfft(frames, n=n_fft, axis=1)) ** 2
    mel = spec @ fb.T
    feats = np.log(np.maximum(mel, LOG_FLOOR))

    if params.cmvn:
        mean = feats.mean(axis=0)
        std = np.sqrt(feats.var(axis=0) + CMVN_EPS)
        feats = (feats - mean) / std
    return FeatureRecord(utt_id, feats[None, :, :].astype(np.float32))


# ---------------------------------------------------------------------------
# Pooling
# ---------------------------------------------------------------------------

def layernorm_frames(data: np.ndarray, eps: float = LAYERNORM_EPS) -> np.ndarray:
    """Per-frame normalization over the feature dimension, per layer."""
    x = np.asarray(data, dtype=np.float64)
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps)


def pool_record(record: FeatureRecord, normalize: bool = True) -> PooledRecord:
    """Mean over time per layer, optionally after per-frame normalization.

    Normalization is applied here (before pooling) so downstream weighted
    sums over pooled layers equal pooling the normalized framewise weighted
    sum; pooling first would change the normalization statistics.
    """
    x = record.data.astype(np.float64)
    if normalize:
        x = layernorm_frames(x)
    pooled = x.mean(axis=1)
    return PooledRecord(record.utt_id, pooled.astype(np.float32))


# ---------------------------------------------------------------------------
# Binary store
# ---------------------------------------------------------------------------

@dataclass
class IndexEntry:
    utt_id: str
    file: str
    offset: int
    length: int


@dataclass
class CacheIndex:
    entries: dict[str, IndexEntry] = field(default_factory=dict)

    @property
    def total_bytes(self) -> int:
        return sum(e.length for e in self.entries.values())

    def add(self, entry: IndexEntry) -> None:
        if entry.utt_id in self.entries:
            raise CacheFormatError(f"duplicate cache id '{entry.utt_id}'")
        self.entries[entry.utt_id] = entry

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self.entries.values():
                fh.write(json.dumps({"id": entry.utt_id, "file": entry.file,
                                     "offset": entry.offset, "len": entry.length},
                                    separators=(",", ":")) + "\n")

    @classmethod
    def load(cls, path) -> "CacheIndex":
        index = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for raw in fh:
                raw = raw.strip()
                if not raw:
                    continue
                rec = json.loads(raw)
                index.add(IndexEntry(rec["id"], rec["file"], rec["offset"], rec["len"]))
        return index


def record_num_bytes(L: int, T: int, D: int) -> int:
    return HEADER_BYTES + 4 * L * T * D


def encode_record(record: FeatureRecord) -> bytes:
    L, T, D = record.data.shape
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, DTYPE_F32, L, T, D)
    payload = np.ascontiguousarray(record.data, dtype="<f4").tobytes()
    return header + payload


def decode_record(blob: bytes, utt_id: str = "") -> FeatureRecord:
    if len(blob) < HEADER_BYTES:
        raise CacheFormatError("truncated header")
    magic, version, dtype, L, T, D = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise CacheFormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CacheFormatError(f"unsupported format version {version}")
    if dtype != DTYPE_F32:
        raise CacheFormatError(f"unsupported dtype code {dtype}")
    expected = HEADER_BYTES + 4 * L * T * D
    if len(blob) != expected:
        raise CacheFormatError(f"truncated payload: have {len(blob)} bytes, "
                               f"need {expected}")
    data = np.frombuffer(blob, dtype="<f4", offset=HEADER_BYTES).reshape(L, T, D)
    return FeatureRecord(utt_id, data.copy())


class CacheWriter:
    """Single-writer append-only record store producing a CacheIndex."""

    def __init__(self, data_path):
        self.data_path = Path(data_path)
        self.data_path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.data_path, "wb")
        self.index = CacheIndex()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def write_record(self, record: FeatureRecord) -> IndexEntry:
        blob = encode_record(record)
        offset = self._fh.tell()
        self._fh.write(blob)
        entry = IndexEntry(record.utt_id, self.data_path.name, offset, len(blob))
        self.index.add(entry)
        return entry

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()


def read_record(index: CacheIndex, utt_id: str, base_dir) -> FeatureRecord:
    entry = index.entries.get(utt_id)
    if entry is None:
        raise KeyError(f"utterance '{utt_id}' not in cache index")
    path = Path(base_dir) / entry.file
    with open(path, "rb") as fh:
        fh.seek(entry.offset)
        blob = fh.read(entry.length)
    if len(blob) != entry.length:
        raise CacheFormatError(f"record '{utt_id}': file shorter than indexed length")
    return decode_record(blob, utt_id)


# ---------------------------------------------------------------------------
# Storage accounting
# ---------------------------------------------------------------------------

def estimate_storage(manifest, num_layers: int, dim: int, win: int, hop: int,
                     pooled: bool = False, bytes_per_value: int = 4) -> int:
    """Predicted cache size in bytes, headers included.

    Unpooled records scale with per-utterance frame counts derived from the
    manifest's sample counts; pooled records are one frame per layer.
    """
    total = 0
    for utt in manifest:
        if pooled:
            t = 1
        else:
            t = frame_count(utt.n, win, hop)
        total += HEADER_BYTES + bytes_per_value * num_layers * t * dim
    return total


def storage_report_rows(entries: list[dict]) -> str:
    """Render storage accounting as TSV: model, task, pooled, bytes."""
    lines = ["model\ttask\tpooled\tbytes"]
    for e in entries:
        lines.append(f"{e['model']}\t{e['task']}\t{str(e['pooled']).lower()}\t{e['bytes']}")
    return "\n".join(lines) + "\n"
