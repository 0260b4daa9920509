"""Training: data pairing, batching, Adam and the optimization loop."""

from .adam import AdamState, adam_step
from .config import ConfigError, TrainConfig, load_config, parse_config, save_config
from .data import Dataset, DatasetIndex, Pair, ShapeEntry, load_dataset, make_batch
from .loop import LOG_COLUMNS, TrainResult, read_log, resume, train
from .synth import generate_synthetic_pair, synthetic_dataset, write_synthetic

__all__ = [
    "AdamState",
    "adam_step",
    "ConfigError",
    "TrainConfig",
    "load_config",
    "parse_config",
    "save_config",
    "Dataset",
    "DatasetIndex",
    "Pair",
    "ShapeEntry",
    "load_dataset",
    "make_batch",
    "LOG_COLUMNS",
    "TrainResult",
    "read_log",
    "resume",
    "train",
    "generate_synthetic_pair",
    "synthetic_dataset",
    "write_synthetic",
]
