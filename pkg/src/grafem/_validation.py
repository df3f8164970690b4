"""Small input-validation helpers used at module boundaries."""

import numpy as np


def as_points(x, name="points", n=None):
    """Return ``x`` as a C-contiguous float64 array of shape (n, 3)."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} must have shape (n, 3), got {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} must have {n} rows, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_matrices(F, name="F"):
    """Return ``F`` as float64 with trailing shape (3, 3); leading dims are kept."""
    arr = np.asarray(F, dtype=np.float64)
    if arr.shape[-2:] != (3, 3):
        raise ValueError(f"{name} must have trailing shape (3, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_vector3(v, name="vector"):
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got {arr.shape}")
    return arr


def check_positive(value, name):
    if not (np.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
    return float(value)


def check_nonnegative(value, name):
    if not (np.isfinite(value) and value >= 0):
        raise ValueError(f"{name} must be non-negative and finite, got {value!r}")
    return float(value)


def readonly(arr):
    arr = np.array(arr, copy=True, order="C")
    arr.setflags(write=False)
    return arr
