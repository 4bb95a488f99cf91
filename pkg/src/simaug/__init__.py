"""Similarity-gated text data augmentation with a statistical evaluation harness.

The pipeline runs in three phases: score generated candidates against their
source records (phase 1), admit candidates whose similarity clears per-metric
average thresholds (phase 2), and compare classifier quality on the augmented
and unaugmented corpora (phase 3).
"""

__version__ = "0.1.0"

from .backends import BackendConfig, create_backend
from .datasets import Dataset, LabeledRecord, load_dataset, save_dataset
from .engine import AugmentationPlan, augment, build_temp_dataset, compute_thresholds
from .evaluation import evaluate_pipeline, paired_t_test
from .similarity import EmbeddingVector, SimilarityScores, score_pair

__all__ = [
    "AugmentationPlan",
    "BackendConfig",
    "Dataset",
    "EmbeddingVector",
    "LabeledRecord",
    "SimilarityScores",
    "__version__",
    "augment",
    "build_temp_dataset",
    "compute_thresholds",
    "create_backend",
    "evaluate_pipeline",
    "load_dataset",
    "paired_t_test",
    "save_dataset",
    "score_pair",
]
