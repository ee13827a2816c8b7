"""Small input-validation helpers used by the estimator entry points."""

import numpy as np


def as_float_array(values, name, ndim=None, shape=None):
    arr = np.asarray(values, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got ndim={arr.ndim}")
    if shape is not None:
        for axis, want in enumerate(shape):
            if want is not None and arr.shape[axis] != want:
                raise ValueError(
                    f"{name} must have shape {shape}, got {arr.shape}"
                )
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_points(points, dim, name="points"):
    """Coerce to an (m, dim) float array, accepting a single point as (dim,)."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"{name} must be (m, {dim}), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return arr


def check_positive(value, name, allow_none=False):
    if value is None:
        if allow_none:
            return None
        raise ValueError(f"{name} must be set")
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be strictly positive, got {value}")
    return value


def frozen(arr):
    """Return a read-only view; shared types are immutable after construction."""
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr
