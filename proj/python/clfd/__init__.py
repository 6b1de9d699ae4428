"""Frequency-domain continual learning engine."""

from ._clfd import (
    ConfigError,
    DimensionError,
    EncoderWeights,
    FormatError,
    PreconditionError,
    ShapeError,
    average_accuracy,
    config_dump,
    count_flops,
    encode,
    final_forgetting,
    frequency_keep_probs,
    haar_forward,
    haar_inverse,
    run,
    selection_size,
    semantic_keep_probs,
    stability_plasticity,
    topk_select,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "EncoderWeights",
    "FormatError",
    "PreconditionError",
    "ShapeError",
    "average_accuracy",
    "config_dump",
    "count_flops",
    "encode",
    "final_forgetting",
    "frequency_keep_probs",
    "haar_forward",
    "haar_inverse",
    "run",
    "selection_size",
    "semantic_keep_probs",
    "stability_plasticity",
    "topk_select",
]
