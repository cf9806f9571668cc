"""Input validation helpers used at module boundaries."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError


def check_points(points, name: str = "points", min_points: int = 1) -> np.ndarray:
    """Return ``points`` as a contiguous float64 (N, 3) array.

    Raises ValueError for wrong shape or non-finite entries and
    DegenerateInputError when fewer than ``min_points`` rows are present.
    """
    arr = np.ascontiguousarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.shape == (3,):
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} must have shape (N, 3), got {arr.shape}")
    if arr.shape[0] < min_points:
        raise DegenerateInputError(
            f"{name} needs at least {min_points} point(s), got {arr.shape[0]}"
        )
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or Inf coordinates")
    return arr


def check_vector3(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_rotation(R, name: str = "rotation", tol: float = 1e-6) -> np.ndarray:
    """Validate a proper rotation matrix (orthonormal, det +1) within ``tol``."""
    arr = np.asarray(R, dtype=np.float64)
    if arr.shape != (3, 3):
        raise ValueError(f"{name} must be a 3x3 matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or Inf")
    err = np.abs(arr.T @ arr - np.eye(3)).max()
    det = float(np.linalg.det(arr))
    if err > tol or abs(det - 1.0) > tol:
        raise ValueError(
            f"{name} is not a proper rotation (orthogonality error {err:.3g}, det {det:.6f})"
        )
    return arr


def ensure_rng(seed) -> np.random.Generator:
    """Accept an int seed, a SeedSequence, a Generator, or None (fresh entropy)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
