"""Shared desk-scale run configuration used by the experiment scripts and
the end-to-end tests: four synthetic tasks, an informative spectral feature
family versus a pure-noise family, cost accounting for both."""

import sys
from pathlib import Path

SCRIPTS_DIR = Path(__file__).resolve().parent
PLUGIN = SCRIPTS_DIR / "quality_plugin.py"


def desk_run_config(seed: int = 1234) -> dict:
    plugin_pesq = [sys.executable, str(PLUGIN), "pesq"]
    plugin_stoi = [sys.executable, str(PLUGIN), "stoi"]
    small_probe = {"hidden": 24, "depth": 1, "batch_size": 4,
                   "optimizer": {"kind": "adam", "lr": 3e-3},
                   "log_every": 25, "eval_every": 50}
    toy_arch_big = {"stride_ms": 10, "layers": [
        {"type": "conv1d", "in_ch": 1, "out_ch": 64, "kernel": 10, "stride": 5},
        {"type": "self_attention", "d_model": 64, "ff_dim": 256, "heads": 4},
        {"type": "self_attention", "d_model": 64, "ff_dim": 256, "heads": 4},
    ]}
    toy_arch_small = {"stride_ms": 10, "layers": [
        {"type": "linear", "in_dim": 64, "out_dim": 64},
    ]}
    return {
        "seed": seed,
        "baseline": "noise",
        "stoi_scale": "reported",
        "models": [
            {"id": "tones",
             "extractor": {"kind": "spectral", "layers": 3, "n_mels": 40},
             "arch": toy_arch_big},
            {"id": "noise",
             "extractor": {"kind": "noise", "layers": 3, "n_mels": 40, "seed": 77},
             "arch": toy_arch_small},
        ],
        "tasks": [
            {"kind": "ASR", "name": "asr",
             "synth": {"counts": {"train": 40, "dev": 8, "test": 8},
                       "vocab_size": 4, "tokens_range": [2, 4],
                       "token_len": 2000},
             "policy": {"variant": "global_fraction", "fraction": 1.0},
             "train_steps": 600,
             "probe": {**small_probe, "hidden": 32},
             "metrics": {"wer": {"kind": "native"}}},
            {"kind": "SID", "name": "sid",
             "synth": {"counts": {"train": 36, "dev": 9, "test": 9},
                       "num_speakers": 3, "utt_len_range": [6000, 10000]},
             "policy": {"variant": "per_speaker_count", "n": 11},
             "train_steps": 300, "probe": dict(small_probe),
             "metrics": {"acc": {"kind": "native"}}},
            {"kind": "SE", "name": "se",
             "synth": {"counts": {"train": 24, "dev": 6, "test": 6},
                       "vocab_size": 12, "tokens_range": [3, 5],
                       "content": "bands", "noise_db_range": [3.0, 12.0]},
             "policy": {"variant": "stratified_fraction",
                        "edges": [-10.0, 0.0, 5.0, 10.0, 20.0, 35.0],
                        "fraction": 0.5},
             "train_steps": 1200,
             "probe": {**small_probe, "hidden": 48, "depth": 2},
             "fbank": {"win_ms": 32.0, "hop_ms": 16.0},
             "metrics": {"pesq": {"kind": "plugin", "cmd": plugin_pesq},
                         "stoi": {"kind": "plugin", "cmd": plugin_stoi}}},
            {"kind": "SS", "name": "ss",
             "synth": {"counts": {"train": 20, "dev": 6, "test": 6},
                       "num_speakers": 3, "utt_len_range": [6000, 10000],
                       "mix_db_range": [0.0, 10.0]},
             "policy": {"variant": "stratified_fraction",
                        "edges": [0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
                        "fraction": 0.5},
             "train_steps": 300, "probe": dict(small_probe),
             "fbank": {"win_ms": 32.0, "hop_ms": 16.0},
             "metrics": {"si_sdri": {"kind": "native"}}},
        ],
        "cost": {
            "frame_schedule": [200 + 17 * i for i in range(32)],
            "steps_full": {"asr": 200000, "sid": 200000, "se": 150000,
                           "ss": 150000},
            "backward_ratio": 2.0,
        },
    }
