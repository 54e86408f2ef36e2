"""Slate policy learning over large action catalogs."""

from ._slate_forge import (
    ApproxIndex,
    ConfigError,
    Dataset,
    Embeddings,
    ExactIndex,
    InstanceTooLarge,
    IoError,
    ParseError,
    TrainingDiverged,
    ValidationError,
    generate_synthetic,
    max_threads,
    pl_log_prob,
    pl_sample,
    set_max_threads,
    svd_embeddings,
    top_k,
    train,
)

__all__ = [
    "ApproxIndex",
    "ConfigError",
    "Dataset",
    "Embeddings",
    "ExactIndex",
    "InstanceTooLarge",
    "IoError",
    "ParseError",
    "TrainingDiverged",
    "ValidationError",
    "generate_synthetic",
    "max_threads",
    "pl_log_prob",
    "pl_sample",
    "set_max_threads",
    "svd_embeddings",
    "top_k",
    "train",
]
