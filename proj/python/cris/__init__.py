from ._cris import (
    ConfigError,
    DataError,
    Model,
    NumericError,
    ShapeError,
    default_config,
    generate_dataset,
    grad_check,
    iou,
    load_dataset,
    precision_at,
    summarize,
    train,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Model",
    "NumericError",
    "ShapeError",
    "default_config",
    "generate_dataset",
    "grad_check",
    "iou",
    "load_dataset",
    "precision_at",
    "summarize",
    "train",
]
