#!/usr/bin/env python3
"""Surrogate perceptual-quality plugin for desk-scale runs.

Implements the external-metric contract (`<cmd> <ref.wav> <est.wav>` ->
one float on stdout) with SI-SDR-based stand-ins for the real perceptual
metrics, which are out of scope and normally supplied by external tools:

    quality_plugin.py pesq <ref> <est>   -> 1.0 + 3.5 / (1 + exp(-sdr/8))
    quality_plugin.py stoi <ref> <est>   -> 100 / (1 + exp(-sdr/8))

Both maps are monotone in SI-SDR, so rankings match enhancement quality.
"""

import math
import sys

from repbench.audio import read_wav
from repbench.metrics import si_sdr


def main() -> int:
    if len(sys.argv) != 4 or sys.argv[1] not in ("pesq", "stoi"):
        print("usage: quality_plugin.py {pesq|stoi} <ref.wav> <est.wav>",
              file=sys.stderr)
        return 1
    mode, ref_path, est_path = sys.argv[1:]
    ref, _ = read_wav(ref_path)
    est, _ = read_wav(est_path)
    n = min(len(ref), len(est))
    sdr = si_sdr(est[:n], ref[:n])
    squashed = 1.0 / (1.0 + math.exp(-sdr / 8.0))
    value = 1.0 + 3.5 * squashed if mode == "pesq" else 100.0 * squashed
    print(f"{value:.6f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
