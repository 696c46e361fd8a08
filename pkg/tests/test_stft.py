import numpy as np
import pytest

from repbench.probes.stft import (ColaError, StftConfig, apply_mask,
                                  check_cola, frame_energy, istft, stft)


def test_sine_round_trip_interior():
    t = np.arange(16000)
    x = np.sin(2 * np.pi * 440 * t / 16000)
    cfg = StftConfig(n_fft=512, hop=256, window="hann")
    back = istft(stft(x, cfg), cfg, length=len(x))
    interior = slice(512, len(x) - 512)
    assert np.max(np.abs(back[interior] - x[interior])) < 1e-6


def test_random_round_trip_interior(rng):
    x = rng.standard_normal(8192)
    cfg = StftConfig()
    back = istft(stft(x, cfg), cfg, length=len(x))
    interior = slice(512, len(x) - 512)
    assert np.max(np.abs(back[interior] - x[interior])) < 1e-6


def test_impulse_localized():
    x = np.zeros(4096)
    center = 2048
    x[center] = 1.0
    cfg = StftConfig()
    back = istft(stft(x, cfg), cfg, length=len(x))
    support = np.nonzero(np.abs(back) > 1e-9)[0]
    assert np.all(np.abs(support - center) < cfg.n_fft)
    assert back[center] == pytest.approx(1.0, abs=1e-6)


def test_frame_energy_parseval_oracle(rng):
    x = rng.standard_normal(16000)
    cfg = StftConfig()
    frames = stft(x, cfg)
    w = cfg.window_values()
    # Oracle: direct time-domain energy of the windowed frames.
    direct = 0.0
    for t in range(frames.shape[0]):
        seg = x[t * cfg.hop: t * cfg.hop + cfg.n_fft] * w
        direct += float(np.sum(seg * seg))
    assert frame_energy(frames) == pytest.approx(direct, rel=1e-10)


def test_non_cola_configuration_rejected():
    with pytest.raises(ColaError):
        check_cola(StftConfig(n_fft=512, hop=300))
    with pytest.raises(ColaError):
        stft(np.zeros(4096), StftConfig(n_fft=512, hop=300))


def test_sqrt_hann_accepted():
    check_cola(StftConfig(n_fft=512, hop=256, window="sqrt_hann"))


def test_short_waveform_rejected():
    with pytest.raises(ValueError, match="shorter"):
        stft(np.zeros(100), StftConfig())


def test_apply_mask_scales_magnitude_keeps_phase(rng):
    frames = stft(rng.standard_normal(4096), StftConfig())
    masked = apply_mask(np.full(frames.shape, 0.5), frames)
    assert np.allclose(np.abs(masked), 0.5 * np.abs(frames))
    nz = np.abs(frames) > 1e-12
    assert np.allclose(np.angle(masked[nz]), np.angle(frames[nz]))
