"""Input validation helpers shared across the package."""

from __future__ import annotations

import numbers

import numpy as np


def as_float_array(x, name="array", dtype=np.float64):
    """Coerce to a float ndarray, rejecting non-finite entries."""
    arr = np.asarray(x, dtype=dtype)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_shape(arr, shape, name="array"):
    """Check an exact shape; ``None`` in ``shape`` matches any extent."""
    if arr.ndim != len(shape):
        raise ValueError(f"{name} must have {len(shape)} dimensions, got {arr.ndim}")
    for axis, (got, want) in enumerate(zip(arr.shape, shape)):
        if want is not None and got != want:
            raise ValueError(
                f"{name} has shape {arr.shape}, expected {want} along axis {axis}"
            )
    return arr


def check_in_range(arr, lo, hi, name="array"):
    if arr.size and (arr.min() < lo or arr.max() > hi):
        raise ValueError(f"{name} must lie in [{lo}, {hi}]")
    return arr


def check_positive(value, name="value"):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a finite positive number, got {value!r}")
    return float(value)


def check_rng(rng):
    """Accept a Generator or a seed; always return a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
