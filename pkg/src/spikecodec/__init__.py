"""Spike encoding of RF channel-response windows.

A convolutional encoder with a ternary hard-threshold bottleneck,
trained jointly with a spiking regressor of the window's sinusoid
parameters, plus the classical temporal-contrast encoders it is
benchmarked against.
"""

from .signals import (
    ChannelWindow,
    Dataset,
    GeneratorConfig,
    GroundTruth,
    RealWindow,
    WindowSet,
    build_dataset,
    generate_window,
    load_dataset,
    sample_ground_truth,
    save_dataset,
    to_real_window,
)
from .baselines import BaselineEncoding, BaselineParams, grid_search, table_optimum
from .model import SpikeCodec, load_checkpoint, save_checkpoint
from .training import LossBreakdown, TrainConfig, TrainResult, compute_loss, train
from .evaluation import (
    MetricsReport,
    dft_mag_rmse,
    evaluate_method,
    lambda_sweep,
    rec_rmse,
    snr_sweep,
    sparsity,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelWindow",
    "Dataset",
    "GeneratorConfig",
    "GroundTruth",
    "RealWindow",
    "WindowSet",
    "build_dataset",
    "generate_window",
    "load_dataset",
    "sample_ground_truth",
    "save_dataset",
    "to_real_window",
    "BaselineEncoding",
    "BaselineParams",
    "grid_search",
    "table_optimum",
    "SpikeCodec",
    "load_checkpoint",
    "save_checkpoint",
    "LossBreakdown",
    "TrainConfig",
    "TrainResult",
    "compute_loss",
    "train",
    "MetricsReport",
    "dft_mag_rmse",
    "evaluate_method",
    "lambda_sweep",
    "rec_rmse",
    "snr_sweep",
    "sparsity",
]
