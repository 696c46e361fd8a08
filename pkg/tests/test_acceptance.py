"""Acceptance suite: one test per criterion, at the stated tolerances.

Run with ``pytest tests/test_acceptance.py -v`` for a pass/fail line per
criterion. The end-to-end criterion (number 6) runs the full desk-scale
benchmark twice and takes several minutes; everything else is fast.
"""

import itertools
import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest

from repbench import refdata
from repbench.corpus import Manifest, SynthSpec, Utterance, synthesize_corpus
from repbench.cost import CostInputs, cost_minisuperb, cost_superb, reduction_report
from repbench.features import (CacheWriter, FbankParams, HEADER_BYTES,
                               estimate_storage, extract_fbank, pool_record,
                               read_record)
from repbench.metrics import RankVector, si_sdr, si_sdri, spearman_rho
from repbench.probes.aggregator import LayerAggregator
from repbench.probes.ctc import ctc_loss, min_frames
from repbench.probes.gradcheck import grad_check
from repbench.probes.models import ProbeConfig, build_probe
from repbench.probes.stft import StftConfig, istft, stft
from repbench.sampler import SamplingPolicy, apply_policy, stratify
from repbench.scoring import build_leaderboard, to_single_metric

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "scripts"))
from desk_config import desk_run_config  # noqa: E402

from test_ctc import brute_force_loss  # noqa: E402


def _reference_task_scores(stoi_scale):
    table = {}
    for model in refdata.MODELS:
        raw = refdata.cached_setting_metrics(model)
        table[model] = {kind: to_single_metric(
            kind, raw, stoi_scale=stoi_scale) if kind == "SE"
            else to_single_metric(kind, raw) for kind in refdata.TASKS}
    return table


def test_criterion_1_spearman_reproduction():
    """Published rank column vs the full-benchmark ranking implied by its
    rank-delta arrows: rho = 0.9818, within 0.001 of the published 0.982."""
    mini = RankVector({m: float(r) for m, r in refdata.PUBLISHED_RANKS.items()})
    challenge = RankVector({m: float(r) for m, r in refdata.FULL_BENCHMARK_RANKS.items()})
    rho = spearman_rho(mini, challenge)
    assert rho == pytest.approx(0.981818, abs=1e-5)
    assert abs(rho - refdata.PUBLISHED_SPEARMAN_FOUR_TASK) < 0.001
    print(f"\n  rho = {rho:.4f} (published {refdata.PUBLISHED_SPEARMAN_FOUR_TASK})")


def test_criterion_2_score_reproduction_reported_scale():
    """Aggregate scores over the published metric columns at reported
    scales: the rank-4/5 pair lands at ~740 vs ~739 with order preserved,
    the baseline at exactly 0, the flagship on top."""
    board = build_leaderboard(_reference_task_scores("reported"),
                              refdata.BASELINE_MODEL)
    scores = {r.model: r.score for r in board.rows}
    ranks = {r.model: r.rank for r in board.rows}
    assert scores["wav2vec 2.0 Large"] == pytest.approx(740.0, abs=0.5)
    assert scores["HuBERT Large"] == pytest.approx(739.0, abs=0.5)
    assert ranks["wav2vec 2.0 Large"] < ranks["HuBERT Large"]
    assert scores["FBANK"] == 0.0
    assert ranks["WavLM Large"] == 1.0
    print(f"\n  wav2vec 2.0 Large = {scores['wav2vec 2.0 Large']:.2f}, "
          f"HuBERT Large = {scores['HuBERT Large']:.2f}")


@pytest.mark.xfail(strict=True, reason=(
    "published per-task values carry only 2 decimals; at reported metric "
    "scales the recomputed ordering swaps positions 3-5 (WavLM Base vs the "
    "two Large models). The unit-scale STOI reading reproduces the full "
    "published column; see test_criterion_2_rank_reproduction_unit_scale."))
def test_criterion_2_rank_reproduction_reported_scale_strict():
    board = build_leaderboard(_reference_task_scores("reported"),
                              refdata.BASELINE_MODEL)
    for row in board.rows:
        assert row.rank == refdata.PUBLISHED_RANKS[row.model], row.model


def test_criterion_2_rank_reproduction_unit_scale():
    """With STOI rescaled to [0,1] before the SE mean, the recomputed
    ordering equals the published rank column 1-11 exactly."""
    board = build_leaderboard(_reference_task_scores("unit"),
                              refdata.BASELINE_MODEL)
    for row in board.rows:
        assert row.rank == refdata.PUBLISHED_RANKS[row.model], row.model
    print("\n  all 11 published ranks reproduced (unit-scale STOI)")


def test_criterion_3_cost_table_consistency():
    """All 11 published cost rows: recomputed totals within 2-significant-
    figure rounding slack, reductions within 0.05 percentage points."""
    superb = {m: dict(r["superb"]) for m, r in refdata.REFERENCE_COST_ROWS.items()}
    mini = {m: dict(r["mini"]) for m, r in refdata.REFERENCE_COST_ROWS.items()}
    report = reduction_report(superb, mini)
    assert len(report.rows) == 11
    for row in report.rows:
        ref = refdata.REFERENCE_COST_ROWS[row.model]
        for total, printed, parts in (
                (row.superb_total, ref["superb_total"], ref["superb"].values()),
                (row.mini_total, ref["mini_total"], ref["mini"].values())):
            slack = (sum(refdata.two_sig_quantum(p) / 2 for p in parts)
                     + refdata.two_sig_quantum(printed) / 2)
            assert abs(total - printed) <= slack, row.model
        assert abs(row.reduction_pct - ref["reduction"]) <= 0.05, row.model
    fbank = next(r for r in report.rows if r.model == "FBANK")
    assert fbank.reduction_pct == pytest.approx(97.893, abs=5e-3)
    print(f"\n  FBANK reduction {fbank.reduction_pct:.3f}% "
          f"(published {refdata.REFERENCE_COST_ROWS['FBANK']['reduction']})")


def test_criterion_4_cost_formula_unit_checks():
    full = cost_superb(CostInputs(upstream_macs=1e9, downstream_macs=1e8,
                                  steps_full=1e5, backward_ratio=2.0))
    assert full == 1.3e14
    cached = cost_minisuperb(CostInputs(upstream_macs=1e9, downstream_macs=1e8,
                                        steps_mini=1e4, extract_passes=1e3,
                                        backward_ratio=2.0))
    assert cached == 4e12
    print(f"\n  full = {full:.3e}, cached = {cached:.3e} (both exact)")


def test_criterion_5_property_suites(rng):
    # CTC forward DP vs brute-force enumeration, log space, 1e-10.
    worst = 0.0
    for T in range(1, 5):
        for V in range(2, 4):
            pools = [[]] + [[l] for l in range(1, V)] + \
                [list(p) for p in itertools.product(range(1, V), repeat=2)]
            for labels in pools:
                lp = np.log(rng.dirichlet(np.ones(V), size=T))
                mine = ctc_loss(lp, labels).loss
                ref = brute_force_loss(lp, labels)
                if min_frames(labels) > T:
                    assert math.isinf(mine) and math.isinf(ref)
                else:
                    worst = max(worst, abs(mine - ref))
    assert worst < 1e-10

    # Analytic gradients vs central finite differences, double precision.
    cases = [
        ("blstm_ctc", dict(num_classes=3), [1, 2]),
        ("blstm_mask", dict(num_masks=2, n_bins=6), None),
        ("linear_sid", dict(num_classes=4), 2),
    ]
    for head, kwargs, target in cases:
        cfg = ProbeConfig(head=head, input_layers=2, input_dim=5, hidden=3,
                          depth=1, seed=3, dtype="f64", **kwargs)
        probe = build_probe(cfg)
        from repbench.features import FeatureRecord
        rec = FeatureRecord("u", rng.standard_normal((2, 5, 5)).astype(np.float32))
        feats = pool_record(rec) if head == "linear_sid" else rec
        if head == "blstm_mask":
            target = np.stack([np.full((5, 6), 0.85), np.full((5, 6), 0.15)])
        report = grad_check(lambda: probe.loss_and_grads(feats, target),
                            probe.parameters(), eps=1e-5, tolerance=1e-5)
        assert report.passed, (head, [(b.name, b.max_rel_err) for b in report.blocks])

    # STFT round trip on the interior.
    x = rng.standard_normal(16000)
    cfg = StftConfig()
    back = istft(stft(x, cfg), cfg, length=len(x))
    assert np.max(np.abs(back[512:-512] - x[512:-512])) < 1e-6

    # SI-SDR exact scale invariance; improvement of the mixture is zero.
    s = rng.standard_normal(512)
    est = s + 0.2 * rng.standard_normal(512)
    assert si_sdr(3.7 * est, s) == si_sdr(est, s)
    mix = s + rng.standard_normal(512)
    assert si_sdri(mix, mix, s) == 0.0

    # Sampler determinism and per-stratum fraction within one item.
    scores = list(np.linspace(0.0, 5.0, 173))
    utts = [Utterance(id=f"u{i}", sr=16000, n=100, split="train", score=v)
            for i, v in enumerate(scores)]
    edges = [-0.5, 2.6, 3.1, 3.6, 4.0, 4.5]
    policy = SamplingPolicy(variant="stratified_fraction", edges=edges,
                            fraction=0.1, seed=99)
    sub1, info1 = apply_policy(Manifest(utts), policy)
    sub2, _ = apply_policy(Manifest(utts), policy)
    assert [u.id for u in sub1] == [u.id for u in sub2]
    strata, _ = stratify(utts, edges)
    for stratum, took in zip(strata, info1.strata_counts):
        assert abs(took - 0.1 * len(stratum)) <= 1.0

    # Cache round trip is bit-exact.
    from repbench.features import FeatureRecord
    rec = FeatureRecord("u0", rng.standard_normal((3, 17, 9)).astype(np.float32))
    import tempfile
    with tempfile.TemporaryDirectory() as tmp:
        with CacheWriter(Path(tmp) / "data.bin") as w:
            w.write_record(rec)
            index = w.index
        back = read_record(index, "u0", tmp)
    assert back.data.tobytes() == rec.data.tobytes()

    # Softmax layer weights sum to one.
    agg = LayerAggregator(7)
    agg.logits.value[...] = rng.standard_normal(7).astype(np.float32)
    assert abs(agg.weights.sum() - 1.0) < 1e-6
    print("\n  all property suites passed")


@pytest.fixture(scope="module")
def desk_runs(tmp_path_factory):
    """Two fresh end-to-end desk-scale runs of the same config (the second
    with two worker jobs), for the determinism comparison."""
    from repbench.pipeline import RunConfig, run_all
    outs = []
    for tag, jobs in (("one", 1), ("two", 2)):
        out = tmp_path_factory.mktemp(f"desk_{tag}")
        cfg = RunConfig.from_dict(desk_run_config(seed=1234))
        run_all(cfg, out, jobs=jobs)
        outs.append(out)
    return outs


def test_criterion_6_end_to_end_desk_run(desk_runs):
    """Synthetic four-task benchmark, informative vs noise features:
    informative ranked first with a >100 point gap; reruns byte-identical."""
    out1, out2 = desk_runs
    summary = json.loads((out1 / "summary.json").read_text())
    scores = summary["scores"]
    ranks = summary["ranks"]
    assert ranks["tones"] == 1.0
    assert ranks["noise"] == max(ranks.values())
    assert scores["tones"] - scores["noise"] > 100.0

    board = (out1 / "leaderboard.tsv").read_text()
    assert "tones" in board and "noise" in board
    # No degenerate tasks: every task contributed to the score.
    assert "excluded" not in (out1 / "leaderboard.txt").read_text()

    for name in ("leaderboard.tsv", "leaderboard.txt", "summary.json",
                 "cost_report.tsv", "storage_report.tsv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name
    print(f"\n  tones = {scores['tones']:.1f}, noise = {scores['noise']:.1f}, "
          "outputs byte-identical across reruns")


def test_criterion_7_storage_accounting(tmp_path, rng):
    """Measured cache bytes equal the estimate; pooled/unpooled payload
    ratio equals the mean frame count within 1%."""
    spec = SynthSpec(kind="SID", seed=4, counts={"train": 10, "dev": 0, "test": 0},
                     num_speakers=2, utt_len_range=(6000, 14000))
    manifests = synthesize_corpus(spec, tmp_path / "corpus")
    manifest = manifests["train"]
    assert len(manifest) == 10

    params = FbankParams(n_mels=32, cmvn=False)
    win, hop = 400, 160
    frame_counts = []
    measured = {}
    for pooled in (False, True):
        with CacheWriter(tmp_path / f"cache_{pooled}" / "data.bin") as writer:
            for utt in manifest:
                from repbench.corpus import load_audio
                wave, sr = load_audio(tmp_path / "corpus" / "train.jsonl", utt.audio)
                rec = extract_fbank(wave, sr, params, utt.id)
                if not pooled:
                    frame_counts.append(rec.num_frames)
                else:
                    rec = pool_record(rec).as_record()
                writer.write_record(rec)
            measured[pooled] = writer.index.total_bytes
        estimate = estimate_storage(manifest, 1, 32, win, hop, pooled=pooled)
        assert measured[pooled] == estimate, f"pooled={pooled}"

    header_total = HEADER_BYTES * len(manifest)
    ratio = (measured[False] - header_total) / (measured[True] - header_total)
    assert ratio == pytest.approx(np.mean(frame_counts), rel=0.01)
    print(f"\n  measured == estimate for both layouts; payload ratio "
          f"{ratio:.2f} vs mean frames {np.mean(frame_counts):.2f}")
