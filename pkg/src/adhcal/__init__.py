"""Double-head online calibration for dense classifiers, with metrics and oracles."""

from .data import ConfigError, LabeledDataset, ParseError, SplitSpec
from .doublehead import DoubleHeadModel, build_double_head
from .experiments import ExperimentSpec, reference_config, run, validate_config
from .losses import LossKind, loss_and_grad, softmax
from .metrics import PredictionRecords, bin_records, ece, ece_records
from .postproc import Temperature, apply_temperature, fit_temperature
from .trainer import AnnealSchedule, TrainConfig, beta_at, overhead_fraction, train

__version__ = "0.1.0"

__all__ = [
    "AnnealSchedule", "ConfigError", "DoubleHeadModel", "ExperimentSpec", "LabeledDataset",
    "LossKind", "ParseError", "PredictionRecords", "SplitSpec", "Temperature", "TrainConfig",
    "apply_temperature", "beta_at", "bin_records", "build_double_head", "ece", "ece_records",
    "fit_temperature", "loss_and_grad", "overhead_fraction", "reference_config", "run",
    "softmax", "train", "validate_config",
]
