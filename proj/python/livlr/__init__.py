"""Video question answering over visual and linguistic graphs.

Configs and task specs are plain dicts with the same keys as the JSON files
read by the command-line tool.
"""

from ._core import (
    CheckpointError,
    ConfigError,
    DataError,
    Dataset,
    Error,
    Model,
    NumericError,
    ShapeError,
    canonical_config,
    gen_synthetic,
    grad_check,
    load_model,
    param_count,
    preset,
    read_dataset,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "DataError",
    "Dataset",
    "Error",
    "Model",
    "NumericError",
    "ShapeError",
    "canonical_config",
    "gen_synthetic",
    "grad_check",
    "load_model",
    "param_count",
    "preset",
    "read_dataset",
]
