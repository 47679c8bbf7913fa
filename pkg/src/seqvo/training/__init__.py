"""Training loop, configuration and the generator-side model."""

from .config import TrainConfig, load_train_config
from .model import Batch, SeqVOModel, collate, synthesis_terms
from .trainer import Trainer, build_dataset, run_training

__all__ = [
    "Batch",
    "SeqVOModel",
    "TrainConfig",
    "Trainer",
    "build_dataset",
    "collate",
    "load_train_config",
    "run_training",
    "synthesis_terms",
]
