"""Rotations, rigid transforms, axis-angle conversions, and rotation metrics.

All rotations are 3x3 proper orthonormal matrices acting on column vectors;
point clouds are (N, 3) float64 arrays of row vectors, so a transform is
applied as ``points @ R.T + t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .validation import check_points, check_rotation, check_vector3, ensure_rng

# Per-component sampling intervals for random rotation vectors.
ROTATION_INTERVALS = {
    "small": math.pi / 8.0,
    "large": math.pi / 2.0,
}


@dataclass(frozen=True)
class RigidTransform:
    """A rotation followed by a translation: p -> R p + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", check_rotation(self.rotation))
        object.__setattr__(self, "translation", check_vector3(self.translation, "translation"))

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    @staticmethod
    def from_matrix(matrix) -> "RigidTransform":
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape != (4, 4):
            raise ValueError(f"expected a 4x4 homogeneous matrix, got shape {m.shape}")
        return RigidTransform(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix, row-major."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points) -> np.ndarray:
        """Transform a single point or an (N, 3) batch."""
        pts = np.asarray(points, dtype=np.float64)
        single = pts.ndim == 1
        out = np.atleast_2d(pts) @ self.rotation.T + self.translation
        return out[0] if single else out


def apply_transform(transform: RigidTransform, points) -> np.ndarray:
    return transform.apply(points)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform equal to applying ``b`` first, then ``a``."""
    return RigidTransform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def invert(t: RigidTransform) -> RigidTransform:
    rt = t.rotation.T
    return RigidTransform(rt, -(rt @ t.translation))


def axis_angle_to_rotation(vec) -> np.ndarray:
    """Rodrigues construction: rotate about vec/|vec| by |vec| radians.

    The zero vector maps to the identity.
    """
    v = check_vector3(vec, "axis-angle vector")
    theta = float(np.linalg.norm(v))
    if theta == 0.0:
        return np.eye(3)
    axis = v / theta
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + math.sin(theta) * k + (1.0 - math.cos(theta)) * (k @ k)


def rotation_to_axis_angle(R) -> np.ndarray:
    """Canonical axis-angle (angle in [0, pi]) of a proper rotation.

    For 180-degree rotations the axis sign is fixed by making its
    largest-magnitude component positive.
    """
    R = check_rotation(R)
    # Skew part gives sin(theta) * axis; trace gives cos(theta).
    s = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    sin_theta = float(np.linalg.norm(s))
    cos_theta = 0.5 * (float(np.trace(R)) - 1.0)
    theta = math.atan2(sin_theta, cos_theta)

    if theta < 1e-12:
        return np.zeros(3)

    if theta < math.pi - 1e-4:
        return (theta / sin_theta) * s

    # Near pi the skew part vanishes; recover the axis from the symmetric part,
    # where (R + R^T)/2 = cos(theta) I + (1 - cos(theta)) a a^T.
    outer = ((R + R.T) * 0.5 - cos_theta * np.eye(3)) / (1.0 - cos_theta)
    axis = np.sqrt(np.clip(np.diag(outer), 0.0, None))
    lead = int(np.argmax(axis))
    # Off-diagonal entries are a_i * a_j: they carry the relative signs.
    for i in range(3):
        if i != lead and outer[lead, i] < 0.0:
            axis[i] = -axis[i]
    axis /= np.linalg.norm(axis)
    # Strictly below pi the sign is still observable in the skew part.
    if sin_theta > 1e-12 and float(axis @ s) < 0.0:
        axis = -axis
    if math.isclose(theta, math.pi, rel_tol=0.0, abs_tol=1e-12):
        # Largest-magnitude component positive; at pi both signs are equivalent.
        if axis[int(np.argmax(np.abs(axis)))] < 0.0:
            axis = -axis
    return theta * axis


def sample_rotation_vector(mode: str, rng) -> np.ndarray:
    """Draw a rotation vector with each component uniform in the mode's interval.

    ``small`` uses [-pi/8, pi/8) per component, ``large`` [-pi/2, pi/2).
    ``rng`` is an integer seed or a numpy Generator; PCG64 seeding makes the
    draw reproducible across platforms.
    """
    if mode not in ROTATION_INTERVALS:
        raise ValueError(f"unknown rotation mode {mode!r}; expected 'small' or 'large'")
    bound = ROTATION_INTERVALS[mode]
    gen = ensure_rng(rng)
    return gen.uniform(-bound, bound, size=3)


def rotation_accuracy(r_gt, r_pred) -> float:
    """Frobenius deviation of the relative rotation from the identity."""
    r_gt = check_rotation(r_gt, "r_gt")
    r_pred = check_rotation(r_pred, "r_pred")
    return float(np.linalg.norm(np.eye(3) - r_pred @ r_gt.T, ord="fro"))


def centroid(points) -> np.ndarray:
    return check_points(points).mean(axis=0)
