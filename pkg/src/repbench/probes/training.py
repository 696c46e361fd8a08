"""Seeded training loop over cached features, with dev-metric checkpointing.

Training is a pure function of (seed, config, cached features): batches
are drawn from a PCG64 stream, parameters are initialized from the probe
seed, and there is no other source of nondeterminism, so identical inputs
give bitwise-identical loss curves and final parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .layers import Parameter
from .models import Probe


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, lr: float, grad_norm: float):
        self.step = step
        self.lr = lr
        self.grad_norm = grad_norm
        super().__init__(f"non-finite loss at step {step} "
                         f"(lr={lr:g}, grad_norm={grad_norm:.4g})")


@dataclass
class OptimizerConfig:
    kind: str = "adam"
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    momentum: float = 0.9


class Adam:
    def __init__(self, params: list[Parameter], cfg: OptimizerConfig):
        self.params = params
        self.cfg = cfg
        self.m = [np.zeros_like(p.value, dtype=np.float64) for p in params]
        self.v = [np.zeros_like(p.value, dtype=np.float64) for p in params]
        self.t = 0

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.cfg.betas
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad.astype(np.float64)
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = self.cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + self.cfg.eps)
            p.value -= update.astype(p.value.dtype)


class SGDMomentum:
    def __init__(self, params: list[Parameter], cfg: OptimizerConfig):
        self.params = params
        self.cfg = cfg
        self.buf = [np.zeros_like(p.value, dtype=np.float64) for p in params]

    def step(self) -> None:
        for p, buf in zip(self.params, self.buf):
            buf *= self.cfg.momentum
            buf += p.grad.astype(np.float64)
            p.value -= (self.cfg.lr * buf).astype(p.value.dtype)


def build_optimizer(params: list[Parameter], cfg: OptimizerConfig):
    if cfg.kind == "adam":
        return Adam(params, cfg)
    if cfg.kind == "sgd":
        return SGDMomentum(params, cfg)
    raise ValueError(f"unknown optimizer '{cfg.kind}'")


@dataclass
class TrainConfig:
    steps: int
    batch_size: int = 1
    log_every: int = 10
    eval_every: int = 50
    seed: int = 0


@dataclass
class TrainedProbe:
    probe: Probe
    curve: list[tuple[int, float, float]] = field(default_factory=list)
    best_dev_metric: float = -math.inf
    best_step: int = 0
    seed: int = 0

    def curve_tsv(self) -> str:
        lines = ["step\tloss\tdev_metric"]
        for step, loss, dev in self.curve:
            dev_str = "" if math.isnan(dev) else f"{dev:.6f}"
            lines.append(f"{step}\t{loss:.6f}\t{dev_str}")
        return "\n".join(lines) + "\n"

    def save_curve(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.curve_tsv())


def _grad_norm(params: list[Parameter]) -> float:
    total = 0.0
    for p in params:
        total += float(np.sum(p.grad.astype(np.float64) ** 2))
    return math.sqrt(total)


def train(probe: Probe, train_set: list[tuple], cfg: TrainConfig,
          opt_cfg: OptimizerConfig, dev_metric_fn=None) -> TrainedProbe:
    """Run the optimizer for cfg.steps steps over (features, target) pairs.

    ``dev_metric_fn(probe) -> float`` (higher better) selects the best
    checkpoint; without it the final parameters are kept. A batch averages
    gradients over ``batch_size`` utterances (no padding involved).
    """
    if not train_set:
        raise ValueError("empty training set")
    params = probe.parameters()
    optimizer = build_optimizer(params, opt_cfg)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    result = TrainedProbe(probe=probe, seed=cfg.seed)
    best_flat = probe.get_flat()

    def evaluate_dev() -> float:
        return float(dev_metric_fn(probe)) if dev_metric_fn else math.nan

    for step in range(1, cfg.steps + 1):
        idx = rng.integers(0, len(train_set), size=cfg.batch_size)
        probe.zero_grad()
        batch_loss = 0.0
        for j in idx:
            feats, target = train_set[j]
            batch_loss += probe.loss_and_grads(feats, target)
        batch_loss /= cfg.batch_size
        if cfg.batch_size > 1:
            for p in params:
                p.grad /= cfg.batch_size
        if not math.isfinite(batch_loss):
            raise TrainingDiverged(step, opt_cfg.lr, _grad_norm(params))
        optimizer.step()

        is_eval = (step % cfg.eval_every == 0) or step == cfg.steps
        dev = evaluate_dev() if is_eval else math.nan
        if is_eval and dev_metric_fn and dev > result.best_dev_metric:
            result.best_dev_metric = dev
            result.best_step = step
            best_flat = probe.get_flat()
        if (step % cfg.log_every == 0) or step == cfg.steps or is_eval:
            result.curve.append((step, batch_loss, dev))

    if dev_metric_fn:
        probe.set_flat(best_flat)
    else:
        result.best_step = cfg.steps
    return result
