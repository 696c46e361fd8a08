"""Task metrics, rank statistics, and the external-metric plugin surface.

Perceptual metrics (PESQ, STOI) are never computed here; they are consumed
either from an executable plugin (``cmd ref.wav est.wav`` printing one
float) or from a sidecar TSV of ``utt_id<TAB>score``.
"""

from __future__ import annotations

import math
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

SI_SDR_CAP_DB = 100.0

HIGHER_IS_BETTER = {
    "wer": False,
    "wacc": True,
    "acc": True,
    "pesq": True,
    "stoi": True,
    "si_sdr": True,
    "si_sdri": True,
}


@dataclass
class MetricValue:
    metric_id: str
    value: float
    higher_is_better: bool
    units: str = ""


class MetricPluginError(RuntimeError):
    pass


def tokenize(text: str) -> list[str]:
    """Whitespace tokenization, case-folded."""
    return text.casefold().split()


def levenshtein(ref: list, hyp: list) -> int:
    """Edit distance with unit insert/delete/substitute costs."""
    n, m = len(ref), len(hyp)
    prev = list(range(m + 1))
    for i in range(1, n + 1):
        cur = [i] + [0] * m
        for j in range(1, m + 1):
            sub = prev[j - 1] + (0 if ref[i - 1] == hyp[j - 1] else 1)
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, sub)
        prev = cur
    return prev[m]


def wer(ref: list, hyp: list) -> float:
    """Word error rate; with an empty reference, the raw insertion count."""
    if len(ref) == 0:
        return float(len(hyp))
    return levenshtein(ref, hyp) / len(ref)


def accuracy(labels, predictions) -> float:
    if len(labels) != len(predictions):
        raise ValueError(f"length mismatch: {len(labels)} labels vs "
                         f"{len(predictions)} predictions")
    if len(labels) == 0:
        raise ValueError("empty label set")
    hits = sum(1 for a, b in zip(labels, predictions) if a == b)
    return hits / len(labels)


def si_sdr(estimate, reference, cap_db: float = SI_SDR_CAP_DB) -> float:
    """Scale-invariant signal-to-distortion ratio in dB, capped at +-cap."""
    est = np.asarray(estimate, dtype=np.float64)
    ref = np.asarray(reference, dtype=np.float64)
    if est.shape != ref.shape:
        raise ValueError("estimate/reference length mismatch")
    ref_energy = float(np.dot(ref, ref))
    if ref_energy <= 0.0:
        raise ValueError("zero reference signal")
    alpha = float(np.dot(est, ref)) / ref_energy
    target = alpha * ref
    err = target - est
    num = float(np.dot(target, target))
    den = float(np.dot(err, err))
    if den <= 0.0:
        return cap_db
    if num <= 0.0:
        return -cap_db
    return float(np.clip(10.0 * math.log10(num / den), -cap_db, cap_db))


def si_sdri(estimate, mixture, reference, cap_db: float = SI_SDR_CAP_DB) -> float:
    """SI-SDR improvement of the estimate over the unprocessed mixture."""
    return si_sdr(estimate, reference, cap_db) - si_sdr(mixture, reference, cap_db)


# ---------------------------------------------------------------------------
# Rank statistics
# ---------------------------------------------------------------------------

@dataclass
class RankVector:
    """Model id -> rank (1 is best); ties carry average ranks."""

    ranks: dict[str, float]

    @classmethod
    def from_scores(cls, scores: dict[str, float], higher_is_better: bool = True) -> "RankVector":
        items = sorted(scores.items(), key=lambda kv: kv[1],
                       reverse=higher_is_better)
        ranks: dict[str, float] = {}
        i = 0
        while i < len(items):
            j = i
            while j + 1 < len(items) and items[j + 1][1] == items[i][1]:
                j += 1
            avg = (i + j) / 2.0 + 1.0
            for k in range(i, j + 1):
                ranks[items[k][0]] = avg
            i = j + 1
        return cls(ranks)

    @classmethod
    def from_ordering(cls, ordered_ids: list[str]) -> "RankVector":
        return cls({mid: float(i + 1) for i, mid in enumerate(ordered_ids)})

    def has_ties(self) -> bool:
        vals = list(self.ranks.values())
        return len(set(vals)) != len(vals)


def spearman_rho(r1: RankVector, r2: RankVector) -> float:
    """Spearman rank correlation between two leaderboards.

    Uses the closed form 1 - 6*sum(d^2)/(n(n^2-1)) for tie-free ranks and
    Pearson correlation on the rank values otherwise.
    """
    if set(r1.ranks) != set(r2.ranks):
        raise ValueError("rank vectors cover different model sets")
    ids = sorted(r1.ranks)
    a = np.array([r1.ranks[i] for i in ids], dtype=np.float64)
    b = np.array([r2.ranks[i] for i in ids], dtype=np.float64)
    n = len(ids)
    if n < 2:
        raise ValueError("need at least two models")
    if not (r1.has_ties() or r2.has_ties()):
        d = a - b
        return float(1.0 - 6.0 * np.sum(d * d) / (n * (n * n - 1)))
    a_c = a - a.mean()
    b_c = b - b.mean()
    denom = math.sqrt(float(np.dot(a_c, a_c)) * float(np.dot(b_c, b_c)))
    if denom == 0.0:
        raise ValueError("degenerate rank vector (all ranks equal)")
    return float(np.dot(a_c, b_c) / denom)


# ---------------------------------------------------------------------------
# External metric plugins
# ---------------------------------------------------------------------------

def run_metric_plugin(cmd: list[str], ref_path, est_path, timeout: float = 60.0) -> float:
    """Invoke ``cmd ref est``; the plugin prints one float on stdout."""
    argv = list(cmd) + [str(ref_path), str(est_path)]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True,
                              timeout=timeout)
    except OSError as exc:
        raise MetricPluginError(f"plugin {cmd[0]!r} failed to start: {exc}") from exc
    if proc.returncode != 0:
        raise MetricPluginError(
            f"plugin {cmd[0]!r} exited {proc.returncode}: {proc.stderr.strip()}")
    try:
        return float(proc.stdout.strip().split()[-1])
    except (ValueError, IndexError) as exc:
        raise MetricPluginError(
            f"plugin {cmd[0]!r} produced no parseable float: {proc.stdout!r}") from exc


def load_sidecar(path) -> dict[str, float]:
    """Parse a sidecar TSV of utt_id<TAB>score."""
    scores: dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw or raw.startswith("#"):
                continue
            parts = raw.split("\t")
            if len(parts) != 2:
                raise MetricPluginError(f"{path}: line {lineno}: expected "
                                        "utt_id<TAB>score")
            scores[parts[0]] = float(parts[1])
    return scores


def external_metric(metric_id: str, pairs: list[tuple[str, str, str]],
                    plugin_cmd: list[str] | None = None,
                    sidecar: dict[str, float] | None = None,
                    jobs: int = 1) -> tuple[MetricValue, dict[str, float]]:
    """Score (utt_id, ref, est) pairs via plugin or sidecar; aggregate by mean.

    Exactly one of ``plugin_cmd`` / ``sidecar`` must be provided.
    """
    if (plugin_cmd is None) == (sidecar is None):
        raise ValueError("provide exactly one of plugin_cmd or sidecar")
    per_utt: dict[str, float] = {}
    if sidecar is not None:
        for utt_id, _ref, _est in pairs:
            if utt_id not in sidecar:
                raise MetricPluginError(
                    f"sidecar missing score for utterance '{utt_id}'")
            per_utt[utt_id] = sidecar[utt_id]
    else:
        def _one(pair):
            utt_id, ref, est = pair
            return utt_id, run_metric_plugin(plugin_cmd, ref, est)

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                for utt_id, score in pool.map(_one, pairs):
                    per_utt[utt_id] = score
        else:
            for pair in pairs:
                utt_id, score = _one(pair)
                per_utt[utt_id] = score
    if not per_utt:
        raise MetricPluginError(f"no utterances scored for metric '{metric_id}'")
    mean = float(np.mean(list(per_utt.values())))
    value = MetricValue(metric_id, mean,
                        HIGHER_IS_BETTER.get(metric_id, True))
    return value, per_utt
