"""Probe assembly: aggregator + head, loss dispatch, checkpoints.

Three heads cover the four tasks: a linear classifier over pooled vectors
(speaker ID), a BLSTM with a CTC objective (recognition), and a BLSTM
predicting one or two spectral masks against phase-sensitive targets
(enhancement / separation, the latter permutation-invariant).
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from ..features import FeatureRecord, PooledRecord
from .aggregator import LayerAggregator
from .ctc import ctc_loss, ctc_greedy_decode
from .layers import BLSTMStack, Linear, Parameter, cross_entropy, log_softmax, \
    log_softmax_backward, sigmoid
from .masks import mask_mse, pit_mask_mse

CHECKPOINT_MAGIC = b"MSPBPT"
CHECKPOINT_VERSION = 1

HEAD_KINDS = ("linear_sid", "blstm_ctc", "blstm_mask")


@dataclass
class ProbeConfig:
    head: str
    input_layers: int
    input_dim: int
    hidden: int = 256
    depth: int = 3
    num_classes: int = 0   # speakers (linear_sid) or vocab incl. blank (blstm_ctc)
    num_masks: int = 1     # 1 for enhancement, 2 for separation
    n_bins: int = 257
    seed: int = 0
    dtype: str = "f32"

    def validate(self) -> None:
        if self.head not in HEAD_KINDS:
            raise ValueError(f"unknown probe head '{self.head}'")
        if self.head in ("linear_sid", "blstm_ctc") and self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.head == "blstm_mask" and self.num_masks not in (1, 2):
            raise ValueError("num_masks must be 1 or 2")

    def np_dtype(self):
        return np.float64 if self.dtype == "f64" else np.float32

    def config_hash(self) -> bytes:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).digest()


class Probe:
    """Base: parameter plumbing shared by all heads."""

    def __init__(self, config: ProbeConfig):
        config.validate()
        self.config = config
        self.aggregator = LayerAggregator(config.input_layers, config.np_dtype())

    def parameters(self) -> list[Parameter]:
        raise NotImplementedError

    def forward(self, features):
        raise NotImplementedError

    def loss_and_grads(self, features, target) -> float:
        raise NotImplementedError

    def param_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad[...] = 0.0

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.value.reshape(-1).astype(np.float64)
                               for p in self.parameters()])

    def set_flat(self, flat: np.ndarray) -> None:
        offset = 0
        for p in self.parameters():
            n = p.size
            p.value[...] = flat[offset:offset + n].reshape(p.value.shape).astype(p.value.dtype)
            offset += n
        if offset != len(flat):
            raise ValueError("flat parameter vector has wrong length")


class SidLinearProbe(Probe):
    """Mean-pooled features -> linear classifier -> cross entropy."""

    def __init__(self, config: ProbeConfig):
        super().__init__(config)
        rng = np.random.Generator(np.random.PCG64(config.seed))
        self.linear = Linear(config.input_dim, config.num_classes, rng,
                             config.np_dtype(), name="head")

    def parameters(self):
        return self.aggregator.parameters() + self.linear.parameters()

    def forward(self, features) -> np.ndarray:
        if isinstance(features, PooledRecord):
            vec = self.aggregator.forward(features.data, normalize=False)
        else:
            vec = self.aggregator.forward(np.asarray(features), normalize=False)
        return self.linear.forward(vec[None, :])[0]

    def predict(self, features) -> int:
        return int(np.argmax(self.forward(features)))

    def loss_and_grads(self, features, target: int) -> float:
        logits = self.forward(features)
        loss, dlogits = cross_entropy(logits, int(target))
        grad_vec = self.linear.backward(dlogits[None, :].astype(logits.dtype))
        self.aggregator.backward(grad_vec[0])
        return loss


class CtcProbe(Probe):
    """Aggregated frames -> BLSTM -> linear -> log-softmax -> CTC."""

    def __init__(self, config: ProbeConfig):
        super().__init__(config)
        rng = np.random.Generator(np.random.PCG64(config.seed))
        self.blstm = BLSTMStack(config.input_dim, config.hidden, config.depth,
                                rng, config.np_dtype())
        self.out = Linear(self.blstm.out_dim, config.num_classes, rng,
                          config.np_dtype(), name="out")

    def parameters(self):
        return (self.aggregator.parameters() + self.blstm.parameters()
                + self.out.parameters())

    def forward(self, features) -> np.ndarray:
        x = _frames(features, self.aggregator)
        h = self.blstm.forward(x)
        return log_softmax(self.out.forward(h).astype(np.float64), axis=1)

    def decode(self, features) -> list[int]:
        return ctc_greedy_decode(self.forward(features))

    def loss_and_grads(self, features, target: list[int]) -> float:
        x = _frames(features, self.aggregator)
        h = self.blstm.forward(x)
        logits = self.out.forward(h)
        log_probs = log_softmax(logits.astype(np.float64), axis=1)
        result = ctc_loss(log_probs, target)
        if not result.feasible:
            return result.loss
        grad_logits = log_softmax_backward(log_probs, result.grad, axis=1)
        grad_h = self.out.backward(grad_logits.astype(logits.dtype))
        grad_x = self.blstm.backward(grad_h)
        self.aggregator.backward(grad_x)
        return result.loss


class MaskProbe(Probe):
    """Aggregated frames -> BLSTM -> linear -> sigmoid masks [S, T, F]."""

    def __init__(self, config: ProbeConfig):
        super().__init__(config)
        rng = np.random.Generator(np.random.PCG64(config.seed))
        self.blstm = BLSTMStack(config.input_dim, config.hidden, config.depth,
                                rng, config.np_dtype())
        self.out = Linear(self.blstm.out_dim, config.num_masks * config.n_bins,
                          rng, config.np_dtype(), name="out")
        self._sig = None

    def parameters(self):
        return (self.aggregator.parameters() + self.blstm.parameters()
                + self.out.parameters())

    def forward(self, features) -> np.ndarray:
        x = _frames(features, self.aggregator)
        h = self.blstm.forward(x)
        raw = self.out.forward(h)
        sig = sigmoid(raw.astype(np.float64))
        self._sig = sig
        t = x.shape[0]
        return sig.reshape(t, self.config.num_masks, self.config.n_bins).transpose(1, 0, 2)

    def loss_and_grads(self, features, target: np.ndarray) -> float:
        masks = self.forward(features)
        if self.config.num_masks > 1:
            loss, grad_masks, _perm = pit_mask_mse(masks, target)
        else:
            loss, grad_masks = mask_mse(masks, target)
        t = masks.shape[1]
        grad_sig = grad_masks.transpose(1, 0, 2).reshape(t, -1)
        grad_raw = grad_sig * self._sig * (1.0 - self._sig)
        grad_h = self.out.backward(grad_raw.astype(self.out.weight.value.dtype))
        grad_x = self.blstm.backward(grad_h)
        self.aggregator.backward(grad_x)
        return loss


def _frames(features, aggregator: LayerAggregator) -> np.ndarray:
    if isinstance(features, FeatureRecord):
        return aggregator.forward(features.data, normalize=True)
    return aggregator.forward(np.asarray(features), normalize=True)


def build_probe(config: ProbeConfig) -> Probe:
    if config.head == "linear_sid":
        return SidLinearProbe(config)
    if config.head == "blstm_ctc":
        return CtcProbe(config)
    return MaskProbe(config)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(probe: Probe, path) -> None:
    flat = probe.get_flat()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(probe.config.config_hash())
        fh.write(struct.pack("<Q", len(flat)))
        fh.write(flat.astype("<f8").tobytes())


def load_checkpoint(probe: Probe, path) -> None:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"bad checkpoint magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        stored_hash = fh.read(32)
        if stored_hash != probe.config.config_hash():
            raise ValueError("checkpoint config hash does not match probe config")
        (count,) = struct.unpack("<Q", fh.read(8))
        flat = np.frombuffer(fh.read(8 * count), dtype="<f8")
        if len(flat) != count:
            raise ValueError("truncated checkpoint payload")
    probe.set_flat(np.array(flat))
