"""Inducer-tuning and parameter-efficient fine-tuning on a from-scratch autodiff core."""

from ._inducer import (
    Model,
    count_params,
    head_attention,
    kernel_estimate,
    mode_names,
    train,
    verify,
)

__all__ = [
    "Model",
    "count_params",
    "head_attention",
    "kernel_estimate",
    "mode_names",
    "train",
    "verify",
]
