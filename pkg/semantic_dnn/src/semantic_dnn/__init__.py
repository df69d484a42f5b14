"""Covert semantic communication experiment package."""

from .config import COVERT_AS_PRINTED, COVERT_TOTAL_SUM, TrainConfig
from .data import Dataset, load_dataset
from .models import (
    ChannelDecoder,
    ChannelEncoder,
    Classifier,
    SemanticEncoder,
    awgn,
    binary_quantize,
)
from .train import (
    Stage1Result,
    Stage2Result,
    covert_loss,
    covert_statistic,
    evaluate,
    run_models,
    semantic_bits,
    stage1_accuracy,
    train_and_evaluate,
    train_stage1,
    train_stage2,
)

__version__ = "0.1.0"

__all__ = [
    "COVERT_AS_PRINTED", "COVERT_TOTAL_SUM", "TrainConfig",
    "Dataset", "load_dataset",
    "ChannelDecoder", "ChannelEncoder", "Classifier", "SemanticEncoder",
    "awgn", "binary_quantize",
    "Stage1Result", "Stage2Result", "covert_loss", "covert_statistic",
    "evaluate", "run_models", "semantic_bits", "stage1_accuracy",
    "train_and_evaluate", "train_stage1", "train_stage2",
    "__version__",
]
