"""Complex sparse autoencoder whose decoder columns estimate
sensing-matrix columns from unlabeled array measurements."""

from .cmx import CmxError, read_cmx, write_cmx
from .network import (ComplexLinear, EncoderDecoder, NetworkSpec,
                      SplitBatchNorm, from_channel_tensor, modulus_threshold,
                      split_relu, to_channel_tensor)
from .training import (LossTrace, RealizationResult, TrainSpec,
                       TrainingDivergedError, export_pool, loss_terms,
                       train_realization)

__version__ = "0.1.0"

__all__ = [
    "CmxError", "read_cmx", "write_cmx",
    "ComplexLinear", "EncoderDecoder", "NetworkSpec", "SplitBatchNorm",
    "from_channel_tensor", "modulus_threshold", "split_relu",
    "to_channel_tensor",
    "LossTrace", "RealizationResult", "TrainSpec", "TrainingDivergedError",
    "export_pool", "loss_terms", "train_realization",
]
