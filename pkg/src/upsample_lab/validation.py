"""Input validation helpers shared by the functional API and the estimators."""
from __future__ import annotations

import numbers

import numpy as np

from .errors import ConfigError, ShapeError


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_samples(samples, name: str = "samples") -> np.ndarray:
    """Coerce to a finite float64 array of shape (channels, time).

    1-D input is treated as a single channel.
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 1-D or 2-D (channels x time), got ndim={arr.ndim}")
    if arr.shape[0] < 1:
        raise ShapeError(f"{name} needs at least one channel")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} contains non-finite values")
    return arr


def check_weights(weights) -> np.ndarray:
    arr = np.asarray(weights, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, np.newaxis, :]
    if arr.ndim != 3:
        raise ShapeError(f"kernel weights must be (out, in, length), got shape {arr.shape}")
    if arr.shape[2] < 1 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"kernel dimensions must be >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError("kernel weights contain non-finite values")
    return arr

