"""Command-line entry point.

Subcommands mirror the pipeline stages; `run` executes them all. Exit
codes: 0 success, 2 configuration error, 3 stage failure (the failing
stage is named on stderr).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import ManifestError, load_manifest, save_manifest
from .pipeline import ConfigError, RunConfig, RunPaths, StageError, render_report, \
    resolve_task_paths, run_all, stage_cost, stage_eval, stage_extract, \
    stage_sample, stage_score, stage_synth, stage_train
from .sampler import SamplingPolicy, apply_policy

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3


def _add_common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", required=True, help="run config JSON")
    p.add_argument("--out", required=True, help="run output directory")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel jobs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repbench",
        description="Benchmark frozen speech representation models from "
                    "cached offline features")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, doc in (("run", "full pipeline: synth, sample, extract, train, "
                              "eval, cost, score"),
                      ("synth", "generate synthetic corpora"),
                      ("extract", "populate feature caches + storage report"),
                      ("train", "train downstream probes"),
                      ("eval", "evaluate trained probes on the test sets"),
                      ("cost", "emit the training-cost comparison report"),
                      ("score", "build the leaderboard")):
        p = sub.add_parser(name, help=doc)
        _add_common(p)
        if name == "train":
            p.add_argument("--model", default=None, help="restrict to one model id")
            p.add_argument("--task", default=None, help="restrict to one task name")

    p = sub.add_parser("sample", help="sample a manifest with a policy")
    p.add_argument("--task", required=True,
                   help="task spec JSON ({kind, train, ...}) or a manifest path")
    p.add_argument("--policy", required=True, help="sampling policy JSON string")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output subset manifest path")

    p = sub.add_parser("report", help="render tables for a finished run")
    p.add_argument("--out", required=True, help="run directory")
    return parser


def _load_run(args) -> tuple[RunConfig, RunPaths]:
    cfg = RunConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.raw["seed"] = args.seed
    paths = RunPaths(Path(args.out))
    paths.out.mkdir(parents=True, exist_ok=True)
    return cfg, paths


def _cmd_sample(args) -> int:
    policy = SamplingPolicy.from_dict(json.loads(args.policy))
    policy.seed = args.seed
    task_path = Path(args.task)
    kind = None
    manifest_path = task_path
    # --task accepts either a task spec ({"kind", "train", ...}) or a bare
    # manifest; a task spec is a single JSON document with a "train" key.
    text = task_path.read_text(encoding="utf-8").strip()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = None
    if isinstance(doc, dict) and "train" in doc:
        kind = doc.get("kind")
        manifest_path = (task_path.parent / doc["train"]).resolve()
    manifest = load_manifest(manifest_path, kind)
    subset, info = apply_policy(manifest, policy)
    save_manifest(subset, args.out)
    print(f"sampled {info.output_size}/{info.input_size} utterances "
          f"(clamped={info.clamped}) -> {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sample":
            return _cmd_sample(args)
        if args.command == "report":
            print(render_report(args.out))
            return EXIT_OK

        cfg, paths = _load_run(args)
        if args.command == "run":
            summary = run_all(cfg, paths.out, jobs=args.jobs)
            render_report(paths.out)
            print((paths.out / "leaderboard.txt").read_text())
            if "spearman_rho_vs_reference" in summary:
                print(f"Spearman rho vs reference: "
                      f"{summary['spearman_rho_vs_reference']:.4f}")
            return EXIT_OK
        if args.command == "synth":
            stage_synth(cfg, paths)
        elif args.command == "extract":
            stage_synth(cfg, paths)
            stage_sample(cfg, paths)
            rows = stage_extract(cfg, paths, jobs=args.jobs)
            for row in rows:
                print(f"{row['model']}/{row['task']}: {row['status']} "
                      f"({row['bytes']} bytes)")
        elif args.command == "train":
            resolve_task_paths(cfg, paths)
            stage_train(cfg, paths, jobs=args.jobs,
                        only_model=args.model, only_task=args.task)
        elif args.command == "eval":
            resolve_task_paths(cfg, paths)
            stage_eval(cfg, paths, jobs=args.jobs)
        elif args.command == "cost":
            resolve_task_paths(cfg, paths)
            stage_cost(cfg, paths)
        elif args.command == "score":
            stage_score(cfg, paths)
            print((paths.out / "leaderboard.txt").read_text())
        return EXIT_OK
    except (ConfigError, ManifestError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
