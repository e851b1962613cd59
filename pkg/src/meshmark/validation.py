"""Input validation helpers used by the public API.

Small, composable checks in the spirit of ``sklearn.utils.validation``:
every public entry point funnels its array-like arguments through these
so that error messages are uniform and downstream code can assume clean
float64/int64 arrays.
"""

import numbers

import numpy as np

from .errors import BandwidthError, DimensionMismatchError


def check_points(points, name="points"):
    """Coerce to a float64 (n, 3) coordinate array."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} must have shape (n, 3), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_triangles(triangles, n_vertices, name="triangles"):
    """Coerce to an int64 (m, 3) index array with entries in [0, n_vertices)."""
    arr = np.asarray(triangles)
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"{name} must be integer indices, got dtype {arr.dtype}")
    arr = arr.astype(np.int64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} must have shape (m, 3), got {arr.shape}")
    if arr.min() < 0 or arr.max() >= n_vertices:
        raise IndexError(
            f"{name} references vertex {int(arr.max())} of {n_vertices}"
            if arr.max() >= n_vertices
            else f"{name} contains negative indices"
        )
    return arr


def check_vertex_field(values, n_vertices, name="field"):
    """Coerce a per-vertex scalar field to a float64 vector of length n_vertices."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.shape[0] != n_vertices:
        raise DimensionMismatchError(
            f"{name} has length {arr.shape[0]}, expected {n_vertices}"
        )
    return arr


def check_square_matrix(matrix, name="matrix"):
    """Coerce to a square float64 matrix."""
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {arr.shape}")
    return arr


def check_symmetric(matrix, name="matrix", rtol=1e-12):
    """Validate symmetry to relative tolerance and return the matrix."""
    arr = check_square_matrix(matrix, name=name)
    scale = np.abs(arr).max()
    if scale > 0 and np.abs(arr - arr.T).max() > rtol * scale:
        raise ValueError(f"{name} is not symmetric to rtol={rtol}")
    return arr


def check_bandwidth(t):
    """Validate a kernel bandwidth (positive finite scalar)."""
    if not isinstance(t, numbers.Real) or not np.isfinite(t) or t <= 0:
        raise BandwidthError(f"bandwidth must be a positive finite number, got {t!r}")
    return float(t)


def check_count(value, low, high, name="count"):
    """Validate an integer in the closed range [low, high]."""
    if not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < low or value > high:
        raise ValueError(f"{name} must be in [{low}, {high}], got {value}")
    return value


def check_indices(indices, n, name="indices", unique=True):
    """Coerce to an int64 index vector into a collection of size n."""
    arr = np.asarray(indices)
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"{name} must be integers")
    arr = arr.astype(np.int64).ravel()
    if arr.size and (arr.min() < 0 or arr.max() >= n):
        raise IndexError(f"{name} out of range [0, {n})")
    if unique and len(np.unique(arr)) != len(arr):
        raise ValueError(f"{name} contains duplicates")
    return arr
