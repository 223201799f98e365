"""Multi-channel time-domain speech separation with Conv-TasNet."""

__version__ = "0.1.0"

from .checkpoint import load_checkpoint, save_checkpoint
from .cstl import cstl_expand
from .errors import InvalidArgument, NonFiniteError, SamplingFailure
from .losses import pit_loss, si_snr
from .metrics import compare_systems, evaluate_system, ibm_separate, si_snri
from .model import ModelConfig, ParameterSet, count_parameters, init_parameters, separate
from .tensor import Tensor, precision
from .training import TrainConfig, train

__all__ = [
    "InvalidArgument",
    "ModelConfig",
    "NonFiniteError",
    "ParameterSet",
    "SamplingFailure",
    "Tensor",
    "TrainConfig",
    "compare_systems",
    "count_parameters",
    "cstl_expand",
    "evaluate_system",
    "ibm_separate",
    "init_parameters",
    "load_checkpoint",
    "pit_loss",
    "precision",
    "save_checkpoint",
    "separate",
    "si_snr",
    "si_snri",
    "train",
]
