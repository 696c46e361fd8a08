"""Trainable softmax-weighted combination of normalized feature layers.

Representations are layer-normalized per frame, then combined with weights
softmax(logits) where the logits are trained jointly with the probe. For
pooled speaker-ID caches the normalization was already applied before
pooling, so the aggregator is used with ``normalize=False`` there.
"""

from __future__ import annotations

import numpy as np

from ..features import FeatureRecord, PooledRecord, layernorm_frames
from .layers import Parameter


class LayerAggregator:
    def __init__(self, num_layers: int, dtype=np.float32):
        self.num_layers = num_layers
        self.logits = Parameter("aggregator.logits",
                                np.zeros(num_layers, dtype=dtype))
        self._cache = None

    @property
    def weights(self) -> np.ndarray:
        z = self.logits.value.astype(np.float64)
        e = np.exp(z - z.max())
        return e / e.sum()

    def forward(self, feats: np.ndarray, normalize: bool = True) -> np.ndarray:
        """Combine [L, ..., D] features into [..., D]."""
        feats = np.asarray(feats)
        if feats.shape[0] != self.num_layers:
            raise ValueError(f"record has {feats.shape[0]} layers, aggregator "
                             f"expects {self.num_layers}")
        if normalize:
            feats = layernorm_frames(feats)
        w = self.weights
        out = np.tensordot(w, feats, axes=(0, 0))
        self._cache = (feats, w)
        return out.astype(self.logits.value.dtype)

    def backward(self, grad_out: np.ndarray) -> None:
        """Accumulate d(loss)/d(logits); features themselves are frozen."""
        feats, w = self._cache
        flat = feats.reshape(self.num_layers, -1).astype(np.float64)
        dldw = flat @ grad_out.reshape(-1).astype(np.float64)
        grad_logits = w * (dldw - float(w @ dldw))
        self.logits.grad += grad_logits.astype(self.logits.grad.dtype)

    def parameters(self) -> list[Parameter]:
        return [self.logits]


def weighted_sum(features, agg: LayerAggregator) -> np.ndarray:
    """Aggregate a FeatureRecord ([T, D] out) or PooledRecord ([D] out).

    Pooled records skip re-normalization: their frames were normalized
    before time pooling.
    """
    if isinstance(features, PooledRecord):
        return agg.forward(features.data, normalize=False)
    if isinstance(features, FeatureRecord):
        return agg.forward(features.data, normalize=True)
    return agg.forward(np.asarray(features), normalize=True)
