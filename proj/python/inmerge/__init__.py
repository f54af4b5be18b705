"""Python access to the inmerge CNN training engine."""

import json as _json

from ._core import (
    CheckpointError,
    ConfigError,
    DataError,
    InmergeError,
    NumericError,
    ShapeError,
    _evaluate_json,
    auroc,
    cosine_similarity,
    kernel_similarity,
    load_params,
    synth,
    train,
)


def evaluate(checkpoint, data, split="test"):
    """Metrics of a checkpoint on one dataset split, as a dict."""
    return _json.loads(_evaluate_json(str(checkpoint), str(data), split))

__all__ = [
    "CheckpointError",
    "ConfigError",
    "DataError",
    "InmergeError",
    "NumericError",
    "ShapeError",
    "auroc",
    "cosine_similarity",
    "evaluate",
    "kernel_similarity",
    "load_params",
    "synth",
    "train",
]
