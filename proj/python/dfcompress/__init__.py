# Copyright 2026 The dfcompress Authors
# SPDX-License-Identifier: Apache-2.0
"""Structured compression by learned filter masks and SVD thresholds."""

from ._core import (
    Dataset,
    FormatError,
    Model,
    SelectionState,
    build_model,
    compress,
    evaluate,
    load_dataset,
    load_model,
    model_from_bytes,
    penalty,
    realize,
    soft_rank,
    state_from_json,
    svd_values,
    svt,
    synth_dataset,
    train,
)

__all__ = [
    "Dataset",
    "FormatError",
    "Model",
    "SelectionState",
    "build_model",
    "compress",
    "evaluate",
    "load_dataset",
    "load_model",
    "model_from_bytes",
    "penalty",
    "realize",
    "soft_rank",
    "state_from_json",
    "svd_values",
    "svt",
    "synth_dataset",
    "train",
]
