"""Analytic MACs accounting and full-benchmark training-cost comparison.

Accounting conventions (the auditable standard used throughout):

* one MAC = one multiply-accumulate; bias adds and nonlinearities are free
* Linear(in, out): in * out per token
* Conv1d(cin, cout, k, stride): cin * cout * k per output frame,
  out_frames = floor((T - k) / stride) + 1 (valid convolution)
* LSTM(in, h): 4 * h * (in + h) per frame per direction
* Self-attention block(d, ff): (4 d^2 + 2 d ff) * T + 2 d T^2
  (QKV+output projections, two feed-forward mats, QK^T and attn*V)

Training cost with a frozen upstream model of forward cost C_U and a
downstream probe of forward cost C_D over S_t optimizer steps, with
backward/forward ratio R (default 2):

* conventional benchmark: C_U * S_t + C_D * (1 + R) * S_t
  (the upstream runs forward every step but never backward)
* cached-feature benchmark: C_U * S_f + C_D * (1 + R) * S_t_mini
  (the upstream forwards once per data point during extraction, S_f passes)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

DEFAULT_BACKWARD_RATIO = 2.0


@dataclass
class Linear:
    in_dim: int
    out_dim: int

    def macs(self, frames: int) -> tuple[float, int]:
        return float(self.in_dim) * self.out_dim * frames, frames


@dataclass
class Conv1d:
    in_ch: int
    out_ch: int
    kernel: int
    stride: int = 1

    def macs(self, frames: int) -> tuple[float, int]:
        if frames < self.kernel:
            return 0.0, 0
        out_frames = (frames - self.kernel) // self.stride + 1
        return float(self.in_ch) * self.out_ch * self.kernel * out_frames, out_frames


@dataclass
class LSTM:
    input_dim: int
    hidden: int
    bidirectional: bool = False

    def macs(self, frames: int) -> tuple[float, int]:
        per_dir = 4.0 * self.hidden * (self.input_dim + self.hidden) * frames
        return per_dir * (2 if self.bidirectional else 1), frames


@dataclass
class SelfAttentionBlock:
    d_model: int
    ff_dim: int
    heads: int = 1

    def macs(self, frames: int) -> tuple[float, int]:
        d, t = float(self.d_model), float(frames)
        proj = 4.0 * d * d * t          # Q, K, V, output projections
        ff = 2.0 * d * self.ff_dim * t  # two feed-forward matmuls
        attn = 2.0 * d * t * t          # QK^T and attention * V
        return proj + ff + attn, frames


_LAYER_TYPES = {
    "linear": Linear,
    "conv1d": Conv1d,
    "lstm": LSTM,
    "self_attention": SelfAttentionBlock,
}


@dataclass
class ArchSpec:
    """Ordered layer list plus the model's input stride in ms per frame."""

    layers: list
    stride_ms: float = 10.0

    def validate(self) -> None:
        for layer in self.layers:
            for value in vars(layer).values():
                if isinstance(value, bool):
                    continue
                if isinstance(value, (int, float)) and value <= 0:
                    raise ValueError(f"non-positive dimension in {layer}")

    @classmethod
    def from_dict(cls, d: dict) -> "ArchSpec":
        layers = []
        for item in d.get("layers", []):
            kwargs = dict(item)
            kind = kwargs.pop("type")
            if kind not in _LAYER_TYPES:
                raise ValueError(f"unknown layer type '{kind}'")
            layers.append(_LAYER_TYPES[kind](**kwargs))
        spec = cls(layers=layers, stride_ms=d.get("stride_ms", 10.0))
        spec.validate()
        return spec

    @classmethod
    def from_json(cls, path) -> "ArchSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def blstm_probe_arch(input_dim: int, hidden: int = 256, depth: int = 3,
                     out_dim: int | None = None) -> ArchSpec:
    """ArchSpec of the downstream BLSTM probe (for cost accounting)."""
    layers: list = []
    d_in = input_dim
    for _ in range(depth):
        layers.append(LSTM(d_in, hidden, bidirectional=True))
        d_in = 2 * hidden
    if out_dim is not None:
        layers.append(Linear(d_in, out_dim))
    return ArchSpec(layers=layers)


def forward_macs(arch: ArchSpec, frame_schedule: list[int]) -> float:
    """Total forward MACs over a profiling schedule of input lengths."""
    if not frame_schedule:
        raise ValueError("empty frame schedule")
    total = 0.0
    for frames in frame_schedule:
        t = int(frames)
        for layer in arch.layers:
            macs, t = layer.macs(t)
            total += macs
    return total


@dataclass
class CostInputs:
    upstream_macs: float          # forward MACs of the upstream model
    downstream_macs: float        # forward MACs of the downstream probe
    steps_full: float = 0.0       # training steps, conventional benchmark
    steps_mini: float = 0.0       # training steps, cached-feature benchmark
    extract_passes: float = 0.0   # upstream forward passes for extraction
    backward_ratio: float = DEFAULT_BACKWARD_RATIO

    def validate(self) -> None:
        for name, value in vars(self).items():
            if value < 0:
                raise ValueError(f"{name} must be non-negative")


def cost_superb(ci: CostInputs) -> float:
    """Training MACs when the frozen upstream forwards on every step."""
    ci.validate()
    return (ci.upstream_macs * ci.steps_full
            + ci.downstream_macs * (1.0 + ci.backward_ratio) * ci.steps_full)


def cost_minisuperb(ci: CostInputs) -> float:
    """Training MACs with offline extraction: upstream forwards once per datum."""
    ci.validate()
    return (ci.upstream_macs * ci.extract_passes
            + ci.downstream_macs * (1.0 + ci.backward_ratio) * ci.steps_mini)


@dataclass
class CostRow:
    model: str
    superb_by_task: dict[str, float]
    mini_by_task: dict[str, float]
    superb_total: float = 0.0
    mini_total: float = 0.0
    reduction_pct: float = 0.0


@dataclass
class CostReport:
    tasks: list[str]
    rows: list[CostRow] = field(default_factory=list)


def reduction_report(superb: dict[str, dict[str, float]],
                     mini: dict[str, dict[str, float]]) -> CostReport:
    """Totals and percentage reduction per model; task sets must agree."""
    if set(superb) != set(mini):
        raise ValueError("model sets differ between the two cost tables")
    tasks: list[str] | None = None
    report = CostReport(tasks=[])
    for model in superb:
        s_tasks, m_tasks = superb[model], mini[model]
        if set(s_tasks) != set(m_tasks):
            raise ValueError(f"task sets differ for model '{model}'")
        if tasks is None:
            tasks = list(s_tasks)
            report.tasks = tasks
        elif set(tasks) != set(s_tasks):
            raise ValueError(f"task sets differ across models at '{model}'")
        s_total = float(sum(s_tasks.values()))
        m_total = float(sum(m_tasks.values()))
        if s_total <= 0:
            raise ValueError(f"model '{model}' has zero baseline cost")
        row = CostRow(model=model, superb_by_task=dict(s_tasks),
                      mini_by_task=dict(m_tasks), superb_total=s_total,
                      mini_total=m_total,
                      reduction_pct=100.0 * (1.0 - m_total / s_total))
        report.rows.append(row)
    return report


def render_cost_tsv(report: CostReport) -> str:
    tasks = report.tasks
    head = (["model"] + [f"full_{t}" for t in tasks] + ["full_total"]
            + [f"mini_{t}" for t in tasks] + ["mini_total", "reduction_pct"])
    lines = ["\t".join(head)]
    for row in report.rows:
        cells = [row.model]
        cells += [f"{row.superb_by_task[t]:.6e}" for t in tasks]
        cells.append(f"{row.superb_total:.6e}")
        cells += [f"{row.mini_by_task[t]:.6e}" for t in tasks]
        cells.append(f"{row.mini_total:.6e}")
        cells.append(f"{row.reduction_pct:.4f}")
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"
