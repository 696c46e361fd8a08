#!/usr/bin/env python3
"""Run the full desk-scale benchmark (two feature families, four synthetic
tasks) and print the leaderboard, cost and storage tables.

Usage: python3 scripts/run_desk_benchmark.py [--out runs/desk] [--seed 1234]
"""

import argparse
import json
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))
from desk_config import desk_run_config

from repbench.pipeline import RunConfig, render_report, run_all


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="runs/desk")
    parser.add_argument("--seed", type=int, default=1234)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    cfg_dict = desk_run_config(seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg_dict, indent=1))
    cfg = RunConfig.from_dict(cfg_dict)
    summary = run_all(cfg, out, jobs=args.jobs)
    print(render_report(out))
    print("scores:", json.dumps(summary["scores"], indent=1))
    return 0


if __name__ == "__main__":
    sys.exit(main())
