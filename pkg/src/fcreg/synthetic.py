"""Deterministic synthetic point clouds for tests, demos, and dataset stand-ins.

The Stanford scan files are not redistributed with this repository; the lumpy
blob generator below produces surface clouds with matched bounding boxes and a
centroid displaced from the origin, which is what the experiment protocols
rely on. See ``fcreg.datasets`` for the named stand-ins.
"""

from __future__ import annotations

import numpy as np

from .validation import ensure_rng


def plane_grid(n_side: int = 20, spacing: float = 0.01, z: float = 0.0) -> np.ndarray:
    """Regular n_side x n_side grid in the z-plane, centered on the origin."""
    g = (np.arange(n_side) - (n_side - 1) / 2.0) * spacing
    xx, yy = np.meshgrid(g, g, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel(), np.full(xx.size, float(z))], axis=1)
    return pts


def plane_with_spike(n_side: int = 20, spacing: float = 0.01, spike_height: float = 0.05):
    """Plane grid with one raised point; returns (cloud, spike_index)."""
    pts = plane_grid(n_side, spacing)
    spike = (n_side // 2) * n_side + n_side // 2
    pts[spike, 2] += spike_height
    return pts, spike


def sphere_cloud(n: int = 1000, radius: float = 1.0, seed=0) -> np.ndarray:
    """Points uniform on a sphere surface (Gaussian direction trick)."""
    rng = ensure_rng(seed)
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return radius * d


def two_surface_scene(n_per_surface: int = 300, seed=0):
    """A plane patch and a sphere patch, far apart; returns (cloud, labels).

    Labels are 0 for plane points, 1 for sphere points. Used to check that
    descriptors separate surface classes.
    """
    rng = ensure_rng(seed)
    plane = np.zeros((n_per_surface, 3))
    plane[:, :2] = rng.uniform(-0.1, 0.1, (n_per_surface, 2))
    d = rng.normal(size=(n_per_surface, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    sphere = 0.05 * d + np.array([1.0, 0.0, 0.0])
    cloud = np.vstack([plane, sphere])
    labels = np.repeat([0, 1], n_per_surface)
    return cloud, labels


def lumpy_blob(
    n_points: int = 3000,
    bbox=(0.156, 0.153, 0.118),
    n_bumps: int = 12,
    bump_amp=(0.08, 0.35),
    bump_width=(0.25, 0.6),
    centroid_at=(-0.02, 0.09, 0.01),
    seed=0,
) -> np.ndarray:
    """Star-shaped blob with localized bumps; a stand-in for a scanned object.

    Bumps of varying amplitude and angular width break rotational symmetry so
    that local geometric descriptors are discriminative. The result is scaled
    anisotropically to ``bbox`` and shifted so its centroid sits at
    ``centroid_at`` (the experiment protocols need a centroid away from the
    dataset origin).
    """
    rng = ensure_rng(seed)
    bump_dirs = rng.normal(size=(n_bumps, 3))
    bump_dirs /= np.linalg.norm(bump_dirs, axis=1, keepdims=True)
    amps = rng.uniform(*bump_amp, n_bumps)
    widths = rng.uniform(*bump_width, n_bumps)

    dirs = rng.normal(size=(n_points, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)

    # Radial field: unit ball plus Gaussian bumps in angular distance.
    cosines = np.clip(dirs @ bump_dirs.T, -1.0, 1.0)
    angles = np.arccos(cosines)
    radii = 1.0 + (amps * np.exp(-((angles / widths) ** 2))).sum(axis=1)
    pts = dirs * radii[:, None]

    extent = pts.max(axis=0) - pts.min(axis=0)
    pts *= np.asarray(bbox) / extent
    pts += np.asarray(centroid_at, dtype=float) - pts.mean(axis=0)
    return pts
