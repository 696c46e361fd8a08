"""End-to-end orchestration: synth -> sample -> extract -> train -> eval ->
score -> cost -> report, with persisted artifacts at every stage.

Every stage is a pure function of (config, seed): artifact bytes are
reproducible across reruns, sub-seeds are derived from stable hashes of
(run seed, model id, task name, stage), and no artifact embeds wall-clock
state. Stage outputs live in fixed locations under the run directory:

    corpora/<task>/            synthetic audio + manifests
    subsets/<task>/            sampled train/dev manifests (with provenance)
    caches/<model>/<task>/     feature cache (data.bin, index.jsonl, meta.json)
    probes/<model>/<task>/     checkpoint.bin, curve.tsv
    eval/<model>/<task>/       metrics.tsv, enhanced wavs
    storage_report.tsv, cost_report.tsv, leaderboard.tsv, leaderboard.txt,
    summary.json, report.txt
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .audio import read_wav, write_wav
from .corpus import Manifest, SynthSpec, load_manifest, resolve_audio, save_manifest, synthesize_corpus
from .cost import ArchSpec, CostInputs, blstm_probe_arch, cost_minisuperb, cost_superb, \
    forward_macs, reduction_report, render_cost_tsv
from .extractors import Extractor, ExtractorSpec, stable_seed
from .features import CacheIndex, CacheWriter, PooledRecord, estimate_storage, \
    frame_count, pool_record, read_record, storage_report_rows
from .metrics import HIGHER_IS_BETTER, MetricValue, RankVector, accuracy, external_metric, \
    levenshtein, load_sidecar, si_sdri, spearman_rho, tokenize
from .probes.masks import inpsm, mask_mse
from .probes.models import ProbeConfig, build_probe, load_checkpoint, save_checkpoint
from .probes.stft import StftConfig, apply_mask, istft, stft
from .probes.training import OptimizerConfig, TrainConfig, train
from .sampler import SamplingPolicy, apply_policy, subsample_count
from .scoring import build_leaderboard, render_leaderboard_table, render_leaderboard_tsv, \
    to_single_metric


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage '{stage}' failed: {message}")


@dataclass
class ModelConfig:
    id: str
    extractor: ExtractorSpec
    arch: ArchSpec | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        arch = ArchSpec.from_dict(d["arch"]) if d.get("arch") else None
        return cls(id=d["id"], extractor=ExtractorSpec.from_dict(d["extractor"]),
                   arch=arch)


@dataclass
class TaskConfig:
    kind: str
    name: str
    train: str | None = None
    dev: str | None = None
    test: str | None = None
    synth: dict | None = None
    policy: dict = field(default_factory=lambda: {"variant": "identity"})
    dev_subsample: int | None = None
    train_steps: int = 300
    probe: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    fbank: dict = field(default_factory=dict)
    stft: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "TaskConfig":
        allowed = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"task '{d.get('name', '?')}': unknown keys {sorted(unknown)}")
        task = cls(**d)
        if task.kind not in ("ASR", "SID", "SE", "SS"):
            raise ConfigError(f"task '{task.name}': unknown kind '{task.kind}'")
        if task.train_steps <= 0:
            raise ConfigError(f"task '{task.name}': train_steps must be > 0")
        return task

    def framing(self) -> tuple[float, float]:
        win_ms = self.fbank.get("win_ms", 32.0 if self.kind in ("SE", "SS") else 25.0)
        hop_ms = self.fbank.get("hop_ms", 16.0 if self.kind in ("SE", "SS") else 10.0)
        return win_ms, hop_ms

    def stft_config(self) -> StftConfig:
        return StftConfig(n_fft=self.stft.get("n_fft", 512),
                          hop=self.stft.get("hop", 256))

    def pooled(self) -> bool:
        return self.kind == "SID"


@dataclass
class CostConfig:
    frame_schedule: list[int]
    steps_full: dict = field(default_factory=dict)   # task name -> steps
    backward_ratio: float = 2.0

    @classmethod
    def from_dict(cls, d: dict) -> "CostConfig":
        return cls(frame_schedule=list(d["frame_schedule"]),
                   steps_full={k: float(v) for k, v in d.get("steps_full", {}).items()},
                   backward_ratio=float(d.get("backward_ratio", 2.0)))


@dataclass
class RunConfig:
    seed: int
    baseline: str
    models: list[ModelConfig]
    tasks: list[TaskConfig]
    cost: CostConfig | None = None
    reference_ranking: str | None = None
    stoi_scale: str = "reported"
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        try:
            models = [ModelConfig.from_dict(m) for m in d["models"]]
            tasks = [TaskConfig.from_dict(t) for t in d["tasks"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if len({m.id for m in models}) != len(models):
            raise ConfigError("duplicate model ids")
        if len({t.name for t in tasks}) != len(tasks):
            raise ConfigError("duplicate task names")
        cfg = cls(seed=int(d.get("seed", 0)), baseline=d["baseline"],
                  models=models, tasks=tasks,
                  cost=CostConfig.from_dict(d["cost"]) if d.get("cost") else None,
                  reference_ranking=d.get("reference_ranking"),
                  stoi_scale=d.get("stoi_scale", "reported"), raw=d)
        if cfg.baseline not in {m.id for m in models}:
            raise ConfigError(f"baseline '{cfg.baseline}' not among model ids")
        return cfg

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class RunPaths:
    out: Path

    def corpora(self, task: str) -> Path:
        return self.out / "corpora" / task

    def subsets(self, task: str) -> Path:
        return self.out / "subsets" / task

    def cache_dir(self, model: str, task: str) -> Path:
        return self.out / "caches" / model / task

    def probe_dir(self, model: str, task: str) -> Path:
        return self.out / "probes" / model / task

    def eval_dir(self, model: str, task: str) -> Path:
        return self.out / "eval" / model / task


def _provenance(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.config_hash(), "seed": cfg.seed,
            "harness_version": __version__}


# ---------------------------------------------------------------------------
# synth + sample
# ---------------------------------------------------------------------------

def resolve_task_paths(cfg: RunConfig, paths: RunPaths, generate: bool = False) -> None:
    """Point synth-configured tasks at their corpora, generating if asked.

    Generation is deterministic, so regenerating into an existing run
    directory rewrites identical bytes.
    """
    for task in cfg.tasks:
        if task.synth is None:
            continue
        out = paths.corpora(task.name)
        if generate:
            spec_dict = dict(task.synth)
            spec_dict.setdefault("seed", stable_seed(cfg.seed, task.name, "synth"))
            synthesize_corpus(SynthSpec(kind=task.kind, **spec_dict), out)
        elif not (out / "train.jsonl").exists():
            raise StageError("synth", f"task '{task.name}': synthetic corpus "
                                      f"missing at {out}; run the synth stage")
        task.train = str(out / "train.jsonl")
        task.dev = str(out / "dev.jsonl")
        task.test = str(out / "test.jsonl")


def stage_synth(cfg: RunConfig, paths: RunPaths) -> None:
    """Generate synthetic corpora for tasks that declare a synth spec."""
    resolve_task_paths(cfg, paths, generate=True)


def _task_manifests(task: TaskConfig) -> dict[str, tuple[Manifest, Path]]:
    out = {}
    for split in ("train", "dev", "test"):
        path = getattr(task, split)
        if path is None:
            raise ConfigError(f"task '{task.name}': no {split} manifest "
                              "(configure a path or a synth spec)")
        out[split] = (load_manifest(path, task.kind), Path(path))
    return out


def stage_sample(cfg: RunConfig, paths: RunPaths) -> None:
    """Apply each task's sampling policy; persist subsets with provenance."""
    for task in cfg.tasks:
        manifests = _task_manifests(task)
        policy_dict = dict(task.policy)
        policy_dict.setdefault("seed", stable_seed(cfg.seed, task.name, "sample"))
        policy = SamplingPolicy.from_dict(policy_dict)
        subset, _info = apply_policy(manifests["train"][0], policy)
        subset.header.update(_provenance(cfg))
        # Audio refs are relative to the source manifest; rebase them.
        _rebase_audio(subset, manifests["train"][1], paths.subsets(task.name) / "train.jsonl")
        save_manifest(subset, paths.subsets(task.name) / "train.jsonl")

        dev_manifest, dev_path = manifests["dev"]
        if task.dev_subsample is not None:
            dev_seed = stable_seed(cfg.seed, task.name, "dev-sample")
            dev_utts = subsample_count(dev_manifest.utterances,
                                       task.dev_subsample, dev_seed)
            dev_manifest = Manifest(dev_utts, header={
                "__header__": "sampled-subset",
                "policy": {"variant": "fixed_count", "n": task.dev_subsample},
                "seed": dev_seed, "prng": "pcg64", **_provenance(cfg)})
        else:
            dev_manifest = Manifest(list(dev_manifest.utterances),
                                    header={"__header__": "sampled-subset",
                                            "policy": {"variant": "identity"},
                                            **_provenance(cfg)})
        _rebase_audio(dev_manifest, dev_path, paths.subsets(task.name) / "dev.jsonl")
        save_manifest(dev_manifest, paths.subsets(task.name) / "dev.jsonl")


def _rebase_audio(manifest: Manifest, old_manifest_path: Path, new_manifest_path: Path) -> None:
    base = old_manifest_path.parent.resolve()
    for utt in manifest.utterances:
        for fieldname in ("audio", "clean", "noisy", "src1", "src2", "mix"):
            ref = getattr(utt, fieldname)
            if ref is not None and not Path(ref).is_absolute():
                setattr(utt, fieldname, str((base / ref).resolve()))


def sampled_manifests(cfg: RunConfig, paths: RunPaths, task: TaskConfig) -> dict[str, tuple[Manifest, Path]]:
    """Post-sampling manifests for a task: train/dev subsets plus full test."""
    out = {}
    for split in ("train", "dev"):
        p = paths.subsets(task.name) / f"{split}.jsonl"
        if not p.exists():
            raise StageError("extract", f"missing sampled manifest {p}; run the "
                                        "sample stage first")
        out[split] = (load_manifest(p, task.kind), p)
    test_path = Path(task.test)
    out["test"] = (load_manifest(test_path, task.kind), test_path)
    return out


# ---------------------------------------------------------------------------
# extract
# ---------------------------------------------------------------------------

def _input_audio_field(kind: str) -> str:
    return {"ASR": "audio", "SID": "audio", "SE": "noisy", "SS": "mix"}[kind]


def _build_extractor(model: ModelConfig, task: TaskConfig) -> Extractor:
    win_ms, hop_ms = task.framing()
    # Speaker-ID caches keep utterance-level statistics: CMVN off.
    cmvn_override = False if task.kind == "SID" else None
    return Extractor(model.extractor, win_ms, hop_ms, cmvn_override)


def stage_extract(cfg: RunConfig, paths: RunPaths, jobs: int = 1) -> list[dict]:
    """Populate feature caches for every (model, task); returns status rows."""
    work = [(model, task) for model in cfg.models for task in cfg.tasks]

    def _one(pair):
        model, task = pair
        return _extract_one(cfg, paths, model, task)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_one, work))
    else:
        rows = [_one(p) for p in work]

    report = storage_report_rows(rows)
    (paths.out / "storage_report.tsv").write_text(report)
    return rows


def _extract_one(cfg: RunConfig, paths: RunPaths, model: ModelConfig,
                 task: TaskConfig) -> dict:
    cache_dir = paths.cache_dir(model.id, task.name)
    extractor = _build_extractor(model, task)
    manifests = sampled_manifests(cfg, paths, task)
    pooled = task.pooled()

    utt_lists = [(split, m, p) for split, (m, p) in manifests.items()]
    fingerprint = hashlib.sha256(json.dumps({
        "extractor": extractor.fingerprint(),
        "pooled": pooled,
        "utts": [[u.id, u.n] for _s, m, _p in utt_lists for u in m],
    }, sort_keys=True).encode()).hexdigest()[:16]

    meta_path = cache_dir / "meta.json"
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        if meta.get("fingerprint") == fingerprint and (cache_dir / "data.bin").exists():
            return {"model": model.id, "task": task.name, "pooled": pooled,
                    "bytes": meta["bytes"], "status": "up-to-date",
                    "estimated_bytes": meta["estimated_bytes"]}

    sr_ref = None
    with CacheWriter(cache_dir / "data.bin") as writer:
        for _split, manifest, manifest_path in utt_lists:
            for utt in manifest:
                ref = getattr(utt, _input_audio_field(task.kind))
                wave, sr = read_wav(resolve_audio(manifest_path, ref))
                sr_ref = sr
                record = extractor.extract(wave, sr, utt.id)
                if pooled:
                    record = pool_record(record, normalize=True).as_record()
                writer.write_record(record)
        index = writer.index
    index.save(cache_dir / "index.jsonl")

    win = int(round(extractor.win_ms * (sr_ref or 16000) / 1000.0))
    hop = int(round(extractor.hop_ms * (sr_ref or 16000) / 1000.0))
    all_utts = Manifest([u for _s, m, _p in utt_lists for u in m])
    estimated = estimate_storage(all_utts, extractor.num_layers, extractor.dim,
                                 win, hop, pooled=pooled)
    meta = {"fingerprint": fingerprint, "pooled": pooled,
            "num_layers": extractor.num_layers, "dim": extractor.dim,
            "win": win, "hop": hop, "bytes": index.total_bytes,
            "estimated_bytes": estimated, **_provenance(cfg)}
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=1))
    return {"model": model.id, "task": task.name, "pooled": pooled,
            "bytes": index.total_bytes, "status": "written",
            "estimated_bytes": estimated}


def open_cache(paths: RunPaths, model_id: str, task_name: str) -> tuple[CacheIndex, Path, dict]:
    cache_dir = paths.cache_dir(model_id, task_name)
    meta_path = cache_dir / "meta.json"
    if not meta_path.exists():
        raise StageError("train", f"missing cache for ({model_id}, {task_name}); "
                                  "run the extract stage first")
    meta = json.loads(meta_path.read_text())
    return CacheIndex.load(cache_dir / "index.jsonl"), cache_dir, meta


# ---------------------------------------------------------------------------
# dataset assembly
# ---------------------------------------------------------------------------

@dataclass
class TaskData:
    train: list
    dev: list
    test: list
    vocab: list[str] | None = None        # ASR token inventory (id 0 = blank)
    speakers: list[str] | None = None     # SID label space
    test_utts: list = field(default_factory=list)
    test_manifest_path: Path | None = None


def _asr_targets(text: str, token_to_id: dict[str, int]) -> list[int]:
    return [token_to_id[t] for t in tokenize(text) if t in token_to_id]


def build_task_data(cfg: RunConfig, paths: RunPaths, model: ModelConfig,
                    task: TaskConfig) -> TaskData:
    index, cache_dir, meta = open_cache(paths, model.id, task.name)
    manifests = sampled_manifests(cfg, paths, task)
    pooled = meta["pooled"]
    stft_cfg = task.stft_config()

    vocab = None
    speakers = None
    token_to_id: dict[str, int] = {}
    speaker_to_id: dict[str, int] = {}
    if task.kind == "ASR":
        tokens = sorted({t for u in manifests["train"][0] for t in tokenize(u.text)})
        vocab = tokens
        token_to_id = {t: i + 1 for i, t in enumerate(tokens)}  # 0 is blank
    elif task.kind == "SID":
        speakers = sorted({u.speaker for u in manifests["train"][0]})
        speaker_to_id = {s: i for i, s in enumerate(speakers)}

    def _sample(utt, manifest_path):
        record = read_record(index, utt.id, cache_dir)
        feats = PooledRecord(utt.id, record.data[:, 0, :]) if pooled else record
        if task.kind == "ASR":
            return feats, _asr_targets(utt.text, token_to_id)
        if task.kind == "SID":
            return feats, speaker_to_id.get(utt.speaker, -1)
        if task.kind == "SE":
            noisy, _ = read_wav(resolve_audio(manifest_path, utt.noisy))
            clean, _ = read_wav(resolve_audio(manifest_path, utt.clean))
            mix_frames = stft(noisy, stft_cfg)
            target = inpsm(mix_frames, stft(clean, stft_cfg))[None, :, :]
        else:  # SS
            mix, _ = read_wav(resolve_audio(manifest_path, utt.mix))
            mix_frames = stft(mix, stft_cfg)
            target = np.stack([
                inpsm(mix_frames, stft(read_wav(resolve_audio(manifest_path, s))[0], stft_cfg))
                for s in (utt.src1, utt.src2)])
        if target.shape[1] != feats.num_frames:
            raise StageError("train", f"{task.name}/{utt.id}: feature frames "
                             f"({feats.num_frames}) != mask frames ({target.shape[1]}); "
                             "align fbank win/hop with the stft n_fft/hop")
        return feats, target

    splits = {}
    for split in ("train", "dev", "test"):
        manifest, mpath = manifests[split]
        splits[split] = [_sample(u, mpath) for u in manifest]
    return TaskData(train=splits["train"], dev=splits["dev"], test=splits["test"],
                    vocab=vocab, speakers=speakers,
                    test_utts=list(manifests["test"][0].utterances),
                    test_manifest_path=manifests["test"][1])


def _probe_config(task: TaskConfig, meta: dict, data: TaskData, seed: int) -> ProbeConfig:
    probe = task.probe
    common = dict(input_layers=meta["num_layers"], dim=meta["dim"])
    kwargs = dict(input_layers=common["input_layers"], input_dim=common["dim"],
                  hidden=probe.get("hidden", 256), depth=probe.get("depth", 3),
                  seed=seed, dtype=probe.get("dtype", "f32"))
    if task.kind == "ASR":
        return ProbeConfig(head="blstm_ctc", num_classes=len(data.vocab) + 1, **kwargs)
    if task.kind == "SID":
        return ProbeConfig(head="linear_sid", num_classes=len(data.speakers), **kwargs)
    n_bins = task.stft_config().n_bins
    return ProbeConfig(head="blstm_mask", num_masks=2 if task.kind == "SS" else 1,
                       n_bins=n_bins, **kwargs)


def _dev_metric_fn(task: TaskConfig, data: TaskData):
    """Higher-is-better dev selector: WACC / accuracy / negative mask MSE."""
    if task.kind == "ASR":
        def fn(probe):
            errors, ref_len = 0, 0
            for feats, target in data.dev:
                hyp = probe.decode(feats)
                errors += levenshtein(target, hyp)
                ref_len += len(target)
            return 1.0 - errors / max(ref_len, 1)
        return fn
    if task.kind == "SID":
        def fn(probe):
            labels = [t for _f, t in data.dev]
            preds = [probe.predict(f) for f, _t in data.dev]
            return accuracy(labels, preds)
        return fn

    def fn(probe):
        total = 0.0
        for feats, target in data.dev:
            masks = probe.forward(feats)
            loss, _ = mask_mse(masks, target)
            total += loss
        return -total / max(len(data.dev), 1)
    return fn


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def stage_train(cfg: RunConfig, paths: RunPaths, jobs: int = 1,
                only_model: str | None = None, only_task: str | None = None) -> None:
    work = [(m, t) for m in cfg.models for t in cfg.tasks
            if (only_model is None or m.id == only_model)
            and (only_task is None or t.name == only_task)]

    def _one(pair):
        model, task = pair
        _train_one(cfg, paths, model, task)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_one, work))
    else:
        for p in work:
            _one(p)


def _train_one(cfg: RunConfig, paths: RunPaths, model: ModelConfig, task: TaskConfig) -> None:
    _index, _cache_dir, meta = open_cache(paths, model.id, task.name)
    data = build_task_data(cfg, paths, model, task)
    probe_cfg = _probe_config(task, meta, data,
                              seed=stable_seed(cfg.seed, model.id, task.name, "init"))
    probe = build_probe(probe_cfg)
    opt = OptimizerConfig(
        kind=task.probe.get("optimizer", {}).get("kind", "adam"),
        lr=task.probe.get("optimizer", {}).get("lr", 1e-3),
        momentum=task.probe.get("optimizer", {}).get("momentum", 0.9))
    train_cfg = TrainConfig(steps=task.train_steps,
                            batch_size=task.probe.get("batch_size", 1),
                            log_every=task.probe.get("log_every", 10),
                            eval_every=task.probe.get("eval_every", 50),
                            seed=stable_seed(cfg.seed, model.id, task.name, "train"))
    result = train(probe, data.train, train_cfg, opt,
                   dev_metric_fn=_dev_metric_fn(task, data))

    probe_dir = paths.probe_dir(model.id, task.name)
    save_checkpoint(probe, probe_dir / "checkpoint.bin")
    result.save_curve(probe_dir / "curve.tsv")
    from dataclasses import asdict
    (probe_dir / "probe_config.json").write_text(json.dumps({
        "probe": asdict(probe_cfg),
        "best_step": result.best_step, "best_dev_metric": result.best_dev_metric,
        "provenance": _provenance(cfg)}, sort_keys=True, indent=1))


def _load_trained_probe(paths: RunPaths, model_id: str, task_name: str):
    probe_dir = paths.probe_dir(model_id, task_name)
    cfg_path = probe_dir / "probe_config.json"
    if not cfg_path.exists():
        raise StageError("eval", f"missing trained probe for ({model_id}, {task_name})")
    stored = json.loads(cfg_path.read_text())
    probe_cfg = ProbeConfig(**stored["probe"])
    probe = build_probe(probe_cfg)
    load_checkpoint(probe, probe_dir / "checkpoint.bin")
    return probe


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def stage_eval(cfg: RunConfig, paths: RunPaths, jobs: int = 1) -> None:
    for model in cfg.models:
        for task in cfg.tasks:
            _eval_one(cfg, paths, model, task, jobs)


def _eval_one(cfg: RunConfig, paths: RunPaths, model: ModelConfig,
              task: TaskConfig, jobs: int = 1) -> dict[str, float]:
    probe = _load_trained_probe(paths, model.id, task.name)
    data = build_task_data(cfg, paths, model, task)
    eval_dir = paths.eval_dir(model.id, task.name)
    eval_dir.mkdir(parents=True, exist_ok=True)

    values: dict[str, float] = {}
    if task.kind == "ASR":
        errors, ref_len = 0, 0
        for feats, target in data.test:
            hyp = probe.decode(feats)
            errors += levenshtein(target, hyp)
            ref_len += len(target)
        values["wer"] = 100.0 * errors / max(ref_len, 1)
    elif task.kind == "SID":
        labels = [t for _f, t in data.test]
        preds = [probe.predict(f) for f, _t in data.test]
        values["acc"] = 100.0 * accuracy(labels, preds)
    elif task.kind == "SE":
        pairs = _enhance_and_write(probe, task, data, eval_dir)
        values.update(_external_values(task, pairs, jobs))
    else:  # SS
        values["si_sdri"] = _separate_and_score(probe, task, data)

    lines = ["metric\tvalue"]
    for mid in sorted(values):
        lines.append(f"{mid}\t{values[mid]:.6f}")
    (eval_dir / "metrics.tsv").write_text("\n".join(lines) + "\n")
    return values


def _enhance_and_write(probe, task, data: TaskData,
                       eval_dir: Path) -> list[tuple[str, str, str]]:
    """Apply predicted masks to the mixture, resynthesize, write wavs.

    Metric pairs are trimmed to the reconstructable interior (one frame in
    from each edge); the matching reference slice is written next to the
    estimate so plugins compare like with like.
    """
    stft_cfg = task.stft_config()
    pairs = []
    est_dir = eval_dir / "est"
    ref_dir = eval_dir / "ref"
    for (feats, _target), utt in zip(data.test, data.test_utts):
        noisy, sr = read_wav(resolve_audio(data.test_manifest_path, utt.noisy))
        clean, _ = read_wav(resolve_audio(data.test_manifest_path, utt.clean))
        mask = probe.forward(feats)[0]
        est_frames = apply_mask(mask, stft(noisy, stft_cfg))
        est = istft(est_frames, stft_cfg, length=len(noisy))
        interior = slice(stft_cfg.n_fft, len(noisy) - stft_cfg.n_fft)
        est_path = est_dir / f"{utt.id}.wav"
        ref_path = ref_dir / f"{utt.id}.wav"
        write_wav(est_path, est[interior], sr)
        write_wav(ref_path, clean[interior], sr)
        pairs.append((utt.id, str(ref_path), str(est_path)))
    return pairs


def _external_values(task: TaskConfig, pairs, jobs: int) -> dict[str, float]:
    values = {}
    for metric_id, backend in task.metrics.items():
        kind = backend.get("kind", "native")
        if kind == "plugin":
            mv, _scores = external_metric(metric_id, pairs,
                                          plugin_cmd=backend["cmd"], jobs=jobs)
        elif kind == "sidecar":
            mv, _scores = external_metric(metric_id, pairs,
                                          sidecar=load_sidecar(backend["path"]))
        else:
            continue
        values[metric_id] = mv.value
    return values


def _separate_and_score(probe, task, data: TaskData) -> float:
    """Mean best-permutation SI-SDR improvement over the test set.

    Scored on the reconstructable interior (one frame in from each edge).
    """
    stft_cfg = task.stft_config()
    totals = []
    for (feats, _target), utt in zip(data.test, data.test_utts):
        mix, sr = read_wav(resolve_audio(data.test_manifest_path, utt.mix))
        refs = [read_wav(resolve_audio(data.test_manifest_path, s))[0]
                for s in (utt.src1, utt.src2)]
        masks = probe.forward(feats)
        mix_frames = stft(mix, stft_cfg)
        ests = [istft(apply_mask(m, mix_frames), stft_cfg, length=len(mix))
                for m in masks]
        interior = slice(stft_cfg.n_fft, len(mix) - stft_cfg.n_fft)
        best = -math.inf
        for perm in ((0, 1), (1, 0)):
            val = 0.0
            for est_i, ref_i in zip(perm, range(2)):
                val += si_sdri(ests[est_i][interior], mix[interior],
                               refs[ref_i][interior])
            best = max(best, val / 2.0)
        totals.append(best)
    return float(np.mean(totals))


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------

def read_eval_metrics(paths: RunPaths, model_id: str, task_name: str) -> dict[str, float]:
    path = paths.eval_dir(model_id, task_name) / "metrics.tsv"
    if not path.exists():
        raise StageError("score", f"missing eval metrics for ({model_id}, {task_name})")
    values = {}
    for line in path.read_text().splitlines()[1:]:
        mid, val = line.split("\t")
        values[mid] = float(val)
    return values


def stage_score(cfg: RunConfig, paths: RunPaths) -> dict:
    task_scores: dict[str, dict[str, float]] = {}
    for model in cfg.models:
        task_scores[model.id] = {}
        for task in cfg.tasks:
            raw = read_eval_metrics(paths, model.id, task.name)
            task_scores[model.id][task.name] = to_single_metric(
                task.kind, raw, stoi_scale=cfg.stoi_scale)

    reference = None
    if cfg.reference_ranking:
        with open(cfg.reference_ranking, "r", encoding="utf-8") as fh:
            ordered = json.load(fh)
        reference = RankVector.from_ordering(ordered)

    board = build_leaderboard(task_scores, cfg.baseline, reference)
    (paths.out / "leaderboard.tsv").write_text(render_leaderboard_tsv(board))
    (paths.out / "leaderboard.txt").write_text(render_leaderboard_table(board))

    summary = {**_provenance(cfg), "stoi_scale": cfg.stoi_scale,
               "baseline": cfg.baseline,
               "scores": {row.model: row.score for row in board.rows},
               "ranks": {row.model: row.rank for row in board.rows}}
    if reference is not None:
        summary["spearman_rho_vs_reference"] = spearman_rho(board.ranking(), reference)
    (paths.out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=1))
    return summary


# ---------------------------------------------------------------------------
# cost
# ---------------------------------------------------------------------------

def stage_cost(cfg: RunConfig, paths: RunPaths) -> None:
    if cfg.cost is None:
        return
    schedule = cfg.cost.frame_schedule
    superb: dict[str, dict[str, float]] = {}
    mini: dict[str, dict[str, float]] = {}
    for model in cfg.models:
        if model.arch is None:
            continue
        c_up = forward_macs(model.arch, schedule)
        superb[model.id] = {}
        mini[model.id] = {}
        for task in cfg.tasks:
            _index, _dir, meta = open_cache(paths, model.id, task.name)
            probe_arch = blstm_probe_arch(
                input_dim=meta["dim"], hidden=task.probe.get("hidden", 256),
                depth=task.probe.get("depth", 3))
            c_down = forward_macs(probe_arch, schedule)
            steps_full = cfg.cost.steps_full.get(task.name, 10.0 * task.train_steps)
            extract_passes = _dataset_size(cfg, paths, task)
            ci = CostInputs(upstream_macs=c_up, downstream_macs=c_down,
                            steps_full=steps_full, steps_mini=task.train_steps,
                            extract_passes=extract_passes,
                            backward_ratio=cfg.cost.backward_ratio)
            superb[model.id][task.name] = cost_superb(ci)
            mini[model.id][task.name] = cost_minisuperb(ci)
    if superb:
        report = reduction_report(superb, mini)
        (paths.out / "cost_report.tsv").write_text(render_cost_tsv(report))


def _dataset_size(cfg: RunConfig, paths: RunPaths, task: TaskConfig) -> int:
    total = 0
    for split, (manifest, _p) in sampled_manifests(cfg, paths, task).items():
        total += len(manifest)
    return total


# ---------------------------------------------------------------------------
# run + report
# ---------------------------------------------------------------------------

def run_all(cfg: RunConfig, out_dir, jobs: int = 1) -> dict:
    paths = RunPaths(Path(out_dir))
    paths.out.mkdir(parents=True, exist_ok=True)
    (paths.out / "config.resolved.json").write_text(
        json.dumps(cfg.raw, sort_keys=True, indent=1))
    stages = [("synth", lambda: stage_synth(cfg, paths)),
              ("sample", lambda: stage_sample(cfg, paths)),
              ("extract", lambda: stage_extract(cfg, paths, jobs)),
              ("train", lambda: stage_train(cfg, paths, jobs)),
              ("eval", lambda: stage_eval(cfg, paths, jobs)),
              ("cost", lambda: stage_cost(cfg, paths)),
              ("score", lambda: stage_score(cfg, paths))]
    for name, fn in stages:
        try:
            fn()
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, str(exc)) from exc
    return json.loads((paths.out / "summary.json").read_text())


def render_report(out_dir) -> str:
    """Text report over a finished run directory."""
    out = Path(out_dir)
    sections = []
    lb = out / "leaderboard.txt"
    if not lb.exists():
        raise StageError("report", f"no leaderboard in {out}")
    sections.append("== Leaderboard ==\n" + lb.read_text())

    summary = json.loads((out / "summary.json").read_text())
    if "spearman_rho_vs_reference" in summary:
        sections.append(f"Spearman rho vs reference ranking: "
                        f"{summary['spearman_rho_vs_reference']:.4f}\n")

    cost_path = out / "cost_report.tsv"
    if cost_path.exists():
        sections.append("== Training-cost comparison (MACs) ==\n"
                        + _tsv_to_table(cost_path.read_text()))
    else:
        sections.append("== Training-cost comparison ==\n(cost report absent)\n")

    storage_path = out / "storage_report.tsv"
    if storage_path.exists():
        sections.append("== Feature cache storage ==\n"
                        + _tsv_to_table(storage_path.read_text()))
    report = "\n".join(sections)
    (out / "report.txt").write_text(report)
    return report


def _tsv_to_table(tsv: str) -> str:
    rows = [line.split("\t") for line in tsv.strip().splitlines()]
    widths = [max(len(r[c]) for r in rows if c < len(r))
              for c in range(max(len(r) for r in rows))]
    lines = []
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"
