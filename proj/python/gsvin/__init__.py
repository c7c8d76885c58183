from ._core import (
    Dataset,
    FormatError,
    GenerationError,
    MetricError,
    Model,
    Sample,
    ShapeError,
    UsageError,
    ValidationError,
    astar_shortest,
    build_dataset,
    generate_dataset,
    heuristic_k,
    load_checkpoint,
    load_dataset,
    model_config,
    oracle_report,
    scaled_k,
    tabular_vi,
    train,
)

__all__ = [
    "Dataset",
    "FormatError",
    "GenerationError",
    "MetricError",
    "Model",
    "Sample",
    "ShapeError",
    "UsageError",
    "ValidationError",
    "astar_shortest",
    "build_dataset",
    "generate_dataset",
    "heuristic_k",
    "load_checkpoint",
    "load_dataset",
    "model_config",
    "oracle_report",
    "scaled_k",
    "tabular_vi",
    "train",
]
