"""Downstream probes: layer aggregation, BLSTM/linear heads, CTC and mask
objectives, STFT machinery, seeded training, and gradient checking."""

from .aggregator import LayerAggregator, weighted_sum
from .ctc import CtcResult, ctc_loss, ctc_greedy_decode
from .masks import inpsm, mask_mse, pit_mask_mse
from .stft import StftConfig
from .models import ProbeConfig, build_probe
from .training import OptimizerConfig, TrainConfig, TrainedProbe, train, TrainingDiverged
from .gradcheck import grad_check

__all__ = [
    "LayerAggregator", "weighted_sum",
    "CtcResult", "ctc_loss", "ctc_greedy_decode",
    "inpsm", "mask_mse", "pit_mask_mse",
    "StftConfig",
    "ProbeConfig", "build_probe",
    "OptimizerConfig", "TrainConfig", "TrainedProbe", "train", "TrainingDiverged",
    "grad_check",
]
