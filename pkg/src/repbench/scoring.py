"""Metric normalization, the aggregate benchmark score, and leaderboards.

Each task contributes exactly one higher-is-better scalar: ASR uses
WACC = 100 - WER(%), SID uses accuracy, SE uses the arithmetic mean of
PESQ and STOI (values as reported, STOI in percent, unless
``stoi_scale="unit"`` rescales STOI to [0, 1] first), SS uses SI-SDRi.

The aggregate score normalizes each task against a baseline model and the
per-run best (recomputed from the evaluated pool, never hard-coded), then
scales so a model matching the best in every task scores 1000:

    score(u) = (1000 / |T|) * sum_t (s_t(u) - s_t(base)) / (s_t(best) - s_t(base))
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

from .metrics import RankVector

SCORE_SCALE = 1000.0


@dataclass
class TaskScore:
    model: str
    task: str
    value: float  # higher-is-better scalar


def wacc_from_wer(wer_pct: float) -> float:
    return 100.0 - wer_pct


def to_single_metric(kind: str, raw: dict[str, float],
                     stoi_scale: str = "reported") -> float:
    """Collapse a task's raw metrics to its single higher-is-better scalar."""
    def need(metric_id: str) -> float:
        if metric_id not in raw:
            raise KeyError(f"{kind}: missing metric '{metric_id}'")
        return raw[metric_id]

    if kind == "ASR":
        return wacc_from_wer(need("wer"))
    if kind == "SID":
        return need("acc")
    if kind == "SE":
        stoi = need("stoi")
        if stoi_scale == "unit":
            stoi = stoi / 100.0
        elif stoi_scale != "reported":
            raise ValueError(f"unknown stoi_scale '{stoi_scale}'")
        return (need("pesq") + stoi) / 2.0
    if kind == "SS":
        return need("si_sdri")
    raise ValueError(f"unknown task kind '{kind}'")


def benchmark_score(model_scores: dict[str, float],
                    baseline_scores: dict[str, float],
                    best_scores: dict[str, float]) -> float:
    """Aggregate score of one model against baseline/best reference points."""
    tasks = sorted(model_scores)
    if set(baseline_scores) != set(tasks) or set(best_scores) != set(tasks):
        raise ValueError("task sets differ between model, baseline and best")
    total = 0.0
    for t in tasks:
        denom = best_scores[t] - baseline_scores[t]
        if denom == 0.0:
            raise ValueError(f"task '{t}': baseline equals best (zero denominator)")
        total += (model_scores[t] - baseline_scores[t]) / denom
    return SCORE_SCALE / len(tasks) * total


@dataclass
class LeaderboardRow:
    model: str
    task_scores: dict[str, float]
    score: float
    rank: float
    rank_delta: int | None = None  # positive = moved up vs the reference


@dataclass
class Leaderboard:
    rows: list[LeaderboardRow]
    tasks: list[str]
    baseline: str
    excluded_tasks: list[str] = field(default_factory=list)

    def ranking(self) -> RankVector:
        return RankVector({row.model: row.rank for row in self.rows})

    def ordering(self) -> list[str]:
        return [row.model for row in self.rows]


def build_leaderboard(task_scores: dict[str, dict[str, float]], baseline: str,
                      reference: RankVector | None = None) -> Leaderboard:
    """Score and rank all models; every model must cover every task.

    Tasks where the baseline ties the pool best are excluded with a warning
    (their normalization is undefined). Ties in the final score get average
    ranks. ``reference`` adds per-model rank deltas.
    """
    models = sorted(task_scores)
    if baseline not in task_scores:
        raise ValueError(f"baseline '{baseline}' not among evaluated models")
    tasks = sorted(task_scores[models[0]])
    for m in models:
        if sorted(task_scores[m]) != tasks:
            raise ValueError(f"model '{m}' missing scores for some tasks")

    best = {t: max(task_scores[m][t] for m in models) for t in tasks}
    base = {t: task_scores[baseline][t] for t in tasks}
    usable = [t for t in tasks if best[t] != base[t]]
    excluded = [t for t in tasks if t not in usable]
    if excluded:
        warnings.warn(f"excluding degenerate tasks (baseline == best): {excluded}")
    if not usable:
        raise ValueError("no usable tasks: baseline is best everywhere")

    scores = {m: benchmark_score({t: task_scores[m][t] for t in usable},
                                 {t: base[t] for t in usable},
                                 {t: best[t] for t in usable})
              for m in models}
    ranks = RankVector.from_scores(scores, higher_is_better=True)

    rows = [LeaderboardRow(model=m,
                           task_scores={t: task_scores[m][t] for t in tasks},
                           score=scores[m], rank=ranks.ranks[m])
            for m in models]
    rows.sort(key=lambda r: (r.rank, r.model))
    if reference is not None:
        for row in rows:
            if row.model not in reference.ranks:
                raise ValueError(f"reference ranking missing model '{row.model}'")
            row.rank_delta = int(round(reference.ranks[row.model] - row.rank))
    return Leaderboard(rows=rows, tasks=tasks, baseline=baseline,
                       excluded_tasks=excluded)


def delta_annotation(delta: int | None) -> str:
    if not delta:
        return ""
    arrow = "↑" if delta > 0 else "↓"
    return f"({arrow} {abs(delta)})"


def render_leaderboard_tsv(board: Leaderboard) -> str:
    head = ["model"] + list(board.tasks) + ["score", "rank", "delta"]
    lines = ["\t".join(head)]
    for row in board.rows:
        cells = [row.model]
        cells += [f"{row.task_scores[t]:.4f}" for t in board.tasks]
        cells.append(f"{row.score:.4f}")
        cells.append(f"{row.rank:g}")
        cells.append("" if row.rank_delta is None else str(row.rank_delta))
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def render_leaderboard_table(board: Leaderboard) -> str:
    """Human-readable fixed-width leaderboard."""
    headers = ["Model"] + list(board.tasks) + ["Score", "Rank"]
    body = []
    for row in board.rows:
        rank_str = f"{delta_annotation(row.rank_delta)} {row.rank:g}".strip()
        body.append([row.model]
                    + [f"{row.task_scores[t]:.2f}" for t in board.tasks]
                    + [f"{row.score:.1f}", rank_str])
    widths = [max(len(headers[c]), *(len(r[c]) for r in body))
              for c in range(len(headers))]
    def fmt(cells):
        return "  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                         for i, (c, w) in enumerate(zip(cells, widths)))
    lines = [fmt(headers), fmt(["-" * w for w in widths])]
    lines += [fmt(r) for r in body]
    if board.excluded_tasks:
        lines.append(f"(excluded degenerate tasks: {', '.join(board.excluded_tasks)})")
    return "\n".join(lines) + "\n"
