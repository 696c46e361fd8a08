"""Mono 16-bit PCM WAV read/write.

All synthetic corpora and enhancement outputs go through these helpers so
that integer-domain arithmetic (e.g. exact mixture = sum of sources) is
preserved end to end.
"""

import wave
from pathlib import Path

import numpy as np


def float_to_int16(samples) -> np.ndarray:
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    return np.round(x * 32767.0).astype(np.int16)


def int16_to_float(ints) -> np.ndarray:
    return np.asarray(ints, dtype=np.float64) / 32767.0


def write_wav_int16(path, ints, sample_rate: int = 16000) -> None:
    ints = np.asarray(ints, dtype=np.int16)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(ints.tobytes())


def write_wav(path, samples, sample_rate: int = 16000) -> None:
    """Write float samples in [-1, 1] as mono PCM16."""
    write_wav_int16(path, float_to_int16(samples), sample_rate)


def read_wav_int16(path) -> tuple[np.ndarray, int]:
    with wave.open(str(path), "rb") as w:
        if w.getnchannels() != 1 or w.getsampwidth() != 2:
            raise ValueError(f"{path}: expected mono 16-bit PCM")
        sr = w.getframerate()
        raw = w.readframes(w.getnframes())
    return np.frombuffer(raw, dtype="<i2"), sr


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read mono PCM16 WAV as float64 samples in [-1, 1]."""
    ints, sr = read_wav_int16(path)
    return int16_to_float(ints), sr
