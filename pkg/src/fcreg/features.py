"""Local geometric features: normals, FPFH descriptors, and keypoints.

Neighborhoods are k-nearest-neighbor sets (not radius balls) so that every
feature in this module is invariant to uniform scaling of the input cloud,
and descriptors computed on rigidly moved clouds match the originals up to
histogram-bin quantization noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kdtree import KdTree3
from .validation import check_points

DESCRIPTOR_BINS = 11
DESCRIPTOR_SIZE = 3 * DESCRIPTOR_BINS


@dataclass
class NormalSet:
    """Unit normals with a surface-variation scalar, aligned with cloud indices.

    ``variation`` is the smallest covariance eigenvalue over the eigenvalue sum,
    in [0, 1/3]; it serves as the curvature proxy for keypoint detection.
    ``valid`` is False for degenerate neighborhoods (all neighbors coincident);
    such normals are zero vectors and downstream consumers must skip them.
    """

    normals: np.ndarray
    variation: np.ndarray
    valid: np.ndarray
    k: int

    def __len__(self) -> int:
        return self.normals.shape[0]


@dataclass
class DescriptorSet:
    """Per-point 33-dimensional FPFH descriptors aligned with cloud indices."""

    data: np.ndarray
    k: int
    source: str = ""

    def __len__(self) -> int:
        return self.data.shape[0]


@dataclass
class KeypointParams:
    """Curvature local-maxima detector settings.

    ``nms_radius=None`` resolves to 4x the median 1-NN spacing of the cloud.
    """

    nms_radius: float | None = None
    variation_threshold: float = 0.02
    max_keypoints: int = 200


@dataclass
class KeypointSet:
    indices: np.ndarray
    nms_radius: float
    variation_threshold: float
    max_keypoints: int

    def __len__(self) -> int:
        return self.indices.shape[0]


def estimate_normals(cloud, k: int, tree: KdTree3 | None = None) -> NormalSet:
    """PCA normals over k-NN neighborhoods, centroid-outward orientation.

    The normal is the eigenvector of the neighborhood covariance with the
    smallest eigenvalue. Orientation is flipped so each normal points away
    from the cloud centroid; exact ties fall back to positive z, then y,
    then x component.
    """
    pts = check_points(cloud)
    if k < 3:
        raise ValueError(f"normal estimation needs k >= 3, got {k}")
    if tree is None:
        tree = KdTree3(pts)
    idx, _ = tree.knn(pts, k)

    hoods = pts[idx]
    centered = hoods - hoods.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    eigvals, eigvecs = np.linalg.eigh(cov)

    total = eigvals.sum(axis=1)
    valid = total > 0.0
    normals = eigvecs[:, :, 0].copy()
    variation = np.zeros(len(pts))
    variation[valid] = np.clip(eigvals[valid, 0] / total[valid], 0.0, 1.0 / 3.0)

    outward = pts - pts.mean(axis=0)
    dots = np.einsum("ni,ni->n", normals, outward)
    flip = dots < 0.0
    # Exact ties: orient by sign of z, then y, then x.
    tied = dots == 0.0
    for axis in (2, 1, 0):
        comp = normals[:, axis]
        flip |= tied & (comp < 0.0)
        tied &= comp == 0.0
    normals[flip] = -normals[flip]
    normals[~valid] = 0.0
    return NormalSet(normals=normals, variation=variation, valid=valid, k=k)


def _pair_angles(p_source, n_source, p_targets, n_targets):
    """Darboux-frame angle triples (alpha, phi, theta) for directed pairs.

    Returns (alpha, phi, theta, valid): pairs are invalid when the points
    coincide or the connecting direction is parallel to the source normal.
    """
    d = p_targets - p_source
    dist = np.linalg.norm(d, axis=1)
    valid = dist > 0.0
    safe = np.where(valid, dist, 1.0)
    d_hat = d / safe[:, None]

    v = np.cross(d_hat, n_source)
    v_norm = np.linalg.norm(v, axis=1)
    valid &= v_norm > 1e-12
    v /= np.where(v_norm > 0.0, v_norm, 1.0)[:, None]
    w = np.cross(np.broadcast_to(n_source, v.shape), v)

    alpha = np.einsum("ni,ni->n", v, n_targets)
    phi = d_hat @ n_source
    theta = np.arctan2(np.einsum("ni,ni->n", w, n_targets), n_targets @ n_source)
    return alpha, phi, theta, valid


def _bin_counts(values, low, high, mask):
    scaled = (values - low) * (DESCRIPTOR_BINS / (high - low))
    bins = np.clip(scaled.astype(np.intp), 0, DESCRIPTOR_BINS - 1)
    return np.bincount(bins[mask], minlength=DESCRIPTOR_BINS).astype(float)


def _normalize_blocks(hist):
    out = hist.copy()
    for b in range(3):
        block = out[b * DESCRIPTOR_BINS : (b + 1) * DESCRIPTOR_BINS]
        s = block.sum()
        if s > 0.0:
            block *= 100.0 / s
    return out


def compute_spfh(cloud, normals: NormalSet, index: int, neighbor_indices) -> np.ndarray:
    """Simplified point feature histogram of one point against its neighbors.

    Three 11-bin blocks over alpha in [-1, 1], phi in [-1, 1], and theta in
    [-pi, pi], each normalized to sum 100. Coincident pairs and pairs with
    invalid normals are skipped; with no valid pair the histogram is all zero.
    """
    pts = np.asarray(cloud, dtype=np.float64)
    nbr = np.asarray(neighbor_indices, dtype=np.intp)
    nbr = nbr[nbr != index]
    if not normals.valid[index] or nbr.size == 0:
        return np.zeros(DESCRIPTOR_SIZE)

    alpha, phi, theta, valid = _pair_angles(
        pts[index], normals.normals[index], pts[nbr], normals.normals[nbr]
    )
    valid &= normals.valid[nbr]
    if not valid.any():
        return np.zeros(DESCRIPTOR_SIZE)

    hist = np.concatenate(
        [
            _bin_counts(np.clip(alpha, -1.0, 1.0), -1.0, 1.0, valid),
            _bin_counts(np.clip(phi, -1.0, 1.0), -1.0, 1.0, valid),
            _bin_counts(theta, -np.pi, np.pi, valid),
        ]
    )
    return _normalize_blocks(hist)


def compute_fpfh(
    cloud, normals: NormalSet, k: int, tree: KdTree3 | None = None, source: str = ""
) -> DescriptorSet:
    """FPFH descriptors: each point's SPFH blended with its neighbors' SPFHs.

    The blend weights are inverse neighbor distances made dimensionless with
    the mean neighbor distance, and each 11-bin block of the result is
    renormalized to sum 100, so descriptors are exactly invariant under
    uniform scaling of the cloud.
    """
    pts = check_points(cloud)
    if k < 3:
        raise ValueError(f"FPFH needs k >= 3, got {k}")
    if normals.k != k:
        raise ValueError(f"normals were estimated with k={normals.k}, expected k={k}")
    if len(normals) != len(pts):
        raise ValueError("normals are not aligned with the cloud")
    if tree is None:
        tree = KdTree3(pts)
    idx, d2 = tree.knn(pts, k)
    dist = np.sqrt(d2)

    spfh = np.empty((len(pts), DESCRIPTOR_SIZE))
    for i in range(len(pts)):
        spfh[i] = compute_spfh(pts, normals, i, idx[i])

    data = np.zeros((len(pts), DESCRIPTOR_SIZE))
    for i in range(len(pts)):
        if not normals.valid[i]:
            continue
        nbr, w = idx[i], dist[i]
        keep = (w > 0.0) & (nbr != i)
        if keep.any():
            inv = 1.0 / w[keep]
            blend = w[keep].mean() / keep.sum()
            merged = spfh[i] + blend * (inv[:, None] * spfh[nbr[keep]]).sum(axis=0)
        else:
            merged = spfh[i]
        data[i] = _normalize_blocks(merged)
    return DescriptorSet(data=data, k=k, source=source)


def detect_keypoints(
    cloud, normals: NormalSet, params: KeypointParams | None = None, tree: KdTree3 | None = None
) -> KeypointSet:
    """Surface-variation local maxima with greedy non-maximum suppression.

    Candidates above the variation threshold are visited in descending
    variation order (ties by lower index) and accepted when no previously
    accepted keypoint lies within the suppression radius. An empty result
    means no point passed the threshold; callers should fall back to
    full-cloud registration.
    """
    pts = check_points(cloud)
    if len(pts) < 50:
        raise ValueError(f"keypoint detection needs >= 50 points, got {len(pts)}")
    params = params or KeypointParams()
    if tree is None:
        tree = KdTree3(pts)

    radius = params.nms_radius
    if radius is None:
        _, nn2 = tree.knn(pts, 2)
        radius = 4.0 * float(np.median(np.sqrt(nn2[:, 1])))

    variation = np.where(normals.valid, normals.variation, -np.inf)
    order = np.lexsort((np.arange(len(pts)), -variation))
    selected: list[int] = []
    r2 = radius * radius
    for i in order:
        if variation[i] <= params.variation_threshold:
            break
        p = pts[i]
        if all(((pts[j] - p) ** 2).sum() > r2 for j in selected):
            selected.append(int(i))
            if len(selected) >= params.max_keypoints:
                break
    return KeypointSet(
        indices=np.array(sorted(selected), dtype=np.intp),
        nms_radius=radius,
        variation_threshold=params.variation_threshold,
        max_keypoints=params.max_keypoints,
    )
