# Copyright (c) 2026, The resnet-forge Authors
# SPDX-License-Identifier: Apache-2.0
"""ResNet training, ablation and gradient-flow toolkit backed by a C++ core."""

import numpy as np

from ._core import (
    ContractError,
    CorruptRecordError,
    Error,
    FormatError,
    IoError,
    Model,
    NumericError,
    ShapeError,
    SpecError,
    conv2d,
    conv_oracle_check,
    count_parameters,
    format_param_count,
    gradient_check,
    gradient_check_names,
    load_model,
    make_synthetic_split,
    matmul,
    normalize_byte,
    read_cifar_file,
    run_cli,
    softmax_cross_entropy,
    summary,
    train,
)

MODELS = ("baseline", "mini_resnet", "resnet18", "resnet18_noskip")


def normalize(images):
    """uint8 images -> float64 in [-1, 1]."""
    return (np.asarray(images, dtype=np.float64) / 255.0 - 0.5) / 0.5


def one_hot(labels, classes):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


__all__ = [name for name in dir() if not name.startswith("_") and name != "np"]
