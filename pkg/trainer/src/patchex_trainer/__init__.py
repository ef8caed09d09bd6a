"""Change-detector training on patch-exchange synthesis runs."""

from .data import IGNORE, Normalizer, PairDataset, SampleDataset
from .losses import masked_cross_entropy, temporal_symmetric_loss
from .model import DetectorConfig, SiameseDetector
from .pseudo import generate_pseudo_labels, refine_synth_labels
from .train import (
    TrainResult,
    infer,
    load_checkpoint,
    save_checkpoint,
    train_semisupervised,
    train_unsupervised,
)

__all__ = [
    "IGNORE",
    "Normalizer",
    "PairDataset",
    "SampleDataset",
    "masked_cross_entropy",
    "temporal_symmetric_loss",
    "DetectorConfig",
    "SiameseDetector",
    "generate_pseudo_labels",
    "refine_synth_labels",
    "TrainResult",
    "infer",
    "load_checkpoint",
    "save_checkpoint",
    "train_semisupervised",
    "train_unsupervised",
]
