"""One-step correspondence-free rigid registration.

The objective is a weighted sum of squared distances over every source-target
point pair; pair weights come from descriptor similarity. Because the optimal
rotation and translation depend on the pairs only through a handful of
weighted sums, the N*M connections are never materialized: a streaming
accumulator keeps the total weight, the weighted point sums, and the weighted
outer-product sum, from which the closed-form SVD solve runs in constant time.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, TooFewKeypointsError
from .features import (
    DescriptorSet,
    KeypointParams,
    compute_fpfh,
    detect_keypoints,
    estimate_normals,
)
from .geometry import RigidTransform
from .kdtree import KdTree3
from .validation import check_points

ILL_CONDITIONED_RATIO = 1e-9


@dataclass
class SolverConfig:
    """Tunables for the full-connection solver and its keypoint variant.

    ``beta`` scales squared descriptor distances inside the similarity weight;
    ``k`` is the neighborhood size for normals and descriptors. ``weight_floor``
    clamps pair weights from below (0 disables it; only needed when every
    similarity underflows). ``n_threads > 1`` splits accumulation over row
    blocks; partial sums are merged in block order, so results match the
    sequential mode.
    """

    beta: float = 100.0
    k: int = 150
    weight_floor: float = 0.0
    keypoints: KeypointParams = field(default_factory=KeypointParams)
    min_keypoints: int = 3
    block_rows: int = 512
    n_threads: int = 1

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.k < 3:
            raise ValueError(f"k must be at least 3, got {self.k}")
        if self.weight_floor < 0:
            raise ValueError(f"weight_floor must be >= 0, got {self.weight_floor}")


@dataclass
class PairAccumulator:
    """Streaming sufficient statistics of weighted point pairs.

    ``total_weight`` is the sum of pair weights, ``source_sum``/``target_sum``
    the weighted coordinate sums, and ``outer_sum`` the weighted sum of
    source-target outer products. These four quantities determine the optimal
    rigid transform exactly.
    """

    total_weight: float = 0.0
    source_sum: np.ndarray = field(default_factory=lambda: np.zeros(3))
    target_sum: np.ndarray = field(default_factory=lambda: np.zeros(3))
    outer_sum: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    pair_count: int = 0

    def merge(self, other: "PairAccumulator") -> "PairAccumulator":
        self.total_weight += other.total_weight
        self.source_sum += other.source_sum
        self.target_sum += other.target_sum
        self.outer_sum += other.outer_sum
        self.pair_count += other.pair_count
        return self

    @staticmethod
    def from_weight_matrix(source, target, weights) -> "PairAccumulator":
        """Accumulate an explicit (N, M) weight matrix. Mainly for tests."""
        p = check_points(source, "source")
        q = check_points(target, "target")
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (len(p), len(q)):
            raise ValueError(f"weights must have shape {(len(p), len(q))}, got {w.shape}")
        return PairAccumulator(
            total_weight=float(w.sum()),
            source_sum=w.sum(axis=1) @ p,
            target_sum=w.sum(axis=0) @ q,
            outer_sum=p.T @ (w @ q),
            pair_count=w.size,
        )

    @staticmethod
    def from_correspondences(source, target, weights=None) -> "PairAccumulator":
        """Accumulate matched pairs source[i] <-> target[i]."""
        p = check_points(source, "source")
        q = check_points(target, "target")
        if len(p) != len(q):
            raise ValueError("matched clouds must have equal length")
        w = np.ones(len(p)) if weights is None else np.asarray(weights, dtype=np.float64)
        return PairAccumulator(
            total_weight=float(w.sum()),
            source_sum=w @ p,
            target_sum=w @ q,
            outer_sum=(p * w[:, None]).T @ q,
            pair_count=len(p),
        )


@dataclass
class SvdResult:
    """SVD of a 3x3 matrix: H = u @ diag(s) @ v.T, singular values descending."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray


@dataclass
class RegistrationResult:
    transform: RigidTransform
    total_weight: float
    pair_count: int
    singular_values: np.ndarray
    reflection_corrected: bool
    ill_conditioned: bool
    source_keypoints: int | None = None
    target_keypoints: int | None = None
    iterations: int | None = None
    final_mse: float | None = None
    termination: str | None = None
    mse_history: list[float] | None = None
    timings: dict[str, float] = field(default_factory=dict)

    def diagnostics(self) -> dict:
        """JSON-serializable diagnostics document."""
        doc = {
            "total_weight": self.total_weight,
            "pair_count": self.pair_count,
            "singular_values": [float(s) for s in self.singular_values],
            "reflection_corrected": self.reflection_corrected,
            "ill_conditioned": self.ill_conditioned,
            "timings_ms": {k: 1e3 * v for k, v in self.timings.items()},
        }
        for key in ("source_keypoints", "target_keypoints", "iterations", "final_mse", "termination"):
            value = getattr(self, key)
            if value is not None:
                doc[key] = value
        return doc


def pair_weight(f_p, f_q, beta: float) -> float:
    """Similarity weight in (0, 1]: exp(-||f_p - f_q||^2 / beta)."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    diff = np.asarray(f_p, dtype=np.float64) - np.asarray(f_q, dtype=np.float64)
    return math.exp(-float(diff @ diff) / beta)


def _accumulate_block(p_block, q, fp_block, fq2, fq_t, fp2_block, beta, floor):
    d2 = fp2_block[:, None] + fq2[None, :] - 2.0 * (fp_block @ fq_t)
    np.clip(d2, 0.0, None, out=d2)  # guard cancellation so weights stay <= 1
    w = np.exp(d2 * (-1.0 / beta))
    if floor > 0.0:
        np.maximum(w, floor, out=w)
    return PairAccumulator(
        total_weight=float(w.sum()),
        source_sum=w.sum(axis=1) @ p_block,
        target_sum=w.sum(axis=0) @ q,
        outer_sum=p_block.T @ (w @ q),
        pair_count=w.size,
    )


def accumulate_full_connection(
    source,
    target,
    source_descriptors: DescriptorSet,
    target_descriptors: DescriptorSet,
    config: SolverConfig | None = None,
) -> PairAccumulator:
    """Accumulate every source-target pair with similarity weights.

    Runs in O(N*M) time over row blocks; memory stays O(block_rows * M)
    regardless of N. With ``n_threads > 1`` blocks are processed concurrently
    and merged in block order, which keeps the result identical to the
    sequential mode.
    """
    config = config or SolverConfig()
    p = check_points(source, "source")
    q = check_points(target, "target")
    fp = np.asarray(source_descriptors.data, dtype=np.float64)
    fq = np.asarray(target_descriptors.data, dtype=np.float64)
    if len(fp) != len(p) or len(fq) != len(q):
        raise ValueError("descriptor sets are not aligned with their clouds")

    fp2 = np.einsum("ij,ij->i", fp, fp)
    fq2 = np.einsum("ij,ij->i", fq, fq)
    fq_t = np.ascontiguousarray(fq.T)
    starts = range(0, len(p), config.block_rows)

    def block(a):
        b = min(a + config.block_rows, len(p))
        return _accumulate_block(
            p[a:b], q, fp[a:b], fq2, fq_t, fp2[a:b], config.beta, config.weight_floor
        )

    acc = PairAccumulator()
    if config.n_threads > 1:
        with ThreadPoolExecutor(max_workers=config.n_threads) as pool:
            for partial in pool.map(block, starts):
                acc.merge(partial)
    else:
        for a in starts:
            acc.merge(block(a))
    if not acc.total_weight > 0.0:
        raise DegenerateInputError(
            "all pair weights underflowed to zero; raise weight_floor or beta"
        )
    return acc


def svd3(H) -> SvdResult:
    """SVD of a 3x3 matrix via one-sided cyclic Jacobi rotations.

    Column pairs of the working matrix are rotated until mutually orthogonal
    (equivalently, Jacobi diagonalization of H^T H), with the rotations
    accumulated into V. Sweep tolerance 1e-14, at most 30 sweeps. Singular
    values are the final column norms, sorted descending; columns whose norm
    vanishes get U completed orthonormally (the zero matrix yields U = V = I).
    """
    a = np.array(H, dtype=np.float64)
    if a.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix contains NaN or Inf")

    v = np.eye(3)
    tol = 1e-14
    for _ in range(30):
        rotated = False
        for i, j in ((0, 1), (0, 2), (1, 2)):
            ai, aj = a[:, i], a[:, j]
            app = float(ai @ ai)
            aqq = float(aj @ aj)
            apq = float(ai @ aj)
            if apq == 0.0 or abs(apq) <= tol * math.sqrt(app * aqq):
                continue
            zeta = (aqq - app) / (2.0 * apq)
            t = 1.0 if zeta == 0.0 else math.copysign(1.0, zeta) / (
                abs(zeta) + math.sqrt(1.0 + zeta * zeta)
            )
            c = 1.0 / math.sqrt(1.0 + t * t)
            s = c * t
            new_i, new_j = c * ai - s * aj, s * ai + c * aj
            a[:, i], a[:, j] = new_i, new_j
            vi, vj = v[:, i].copy(), v[:, j].copy()
            v[:, i], v[:, j] = c * vi - s * vj, s * vi + c * vj
            rotated = True
        if not rotated:
            break

    sigma = np.linalg.norm(a, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    a = a[:, order]
    v = v[:, order]

    u = np.zeros((3, 3))
    cutoff = sigma[0] * 1e-13
    for i in range(3):
        if sigma[i] > cutoff and sigma[i] > 0.0:
            u[:, i] = a[:, i] / sigma[i]
        elif i == 0:
            u[:, 0] = (1.0, 0.0, 0.0)
        elif i == 1:
            seed_axis = np.zeros(3)
            seed_axis[int(np.argmin(np.abs(u[:, 0])))] = 1.0
            cand = seed_axis - (seed_axis @ u[:, 0]) * u[:, 0]
            u[:, 1] = cand / np.linalg.norm(cand)
        else:
            u[:, 2] = np.cross(u[:, 0], u[:, 1])
    return SvdResult(u=u, s=sigma, v=v)


def solve_weighted_closed_form(acc: PairAccumulator) -> RegistrationResult:
    """Closed-form rigid transform from accumulated pair statistics.

    Weighted means are removed algebraically from the outer-product sum to
    form the 3x3 cross-covariance; its SVD gives the rotation (last column of
    V negated first when the raw product would be a reflection) and the
    translation maps the weighted source mean onto the weighted target mean.
    """
    if not acc.total_weight > 0.0:
        raise DegenerateInputError("accumulator has zero total weight")
    source_mean = acc.source_sum / acc.total_weight
    target_mean = acc.target_sum / acc.total_weight
    cross = acc.outer_sum - acc.total_weight * np.outer(source_mean, target_mean)

    dec = svd3(cross)
    reflection = float(np.linalg.det(dec.v)) * float(np.linalg.det(dec.u)) < 0.0
    v = dec.v.copy()
    if reflection:
        v[:, 2] = -v[:, 2]
    rotation = v @ dec.u.T
    translation = target_mean - rotation @ source_mean
    ill = dec.s[0] <= 0.0 or dec.s[1] < ILL_CONDITIONED_RATIO * dec.s[0]
    return RegistrationResult(
        transform=RigidTransform(rotation, translation),
        total_weight=acc.total_weight,
        pair_count=acc.pair_count,
        singular_values=dec.s,
        reflection_corrected=reflection,
        ill_conditioned=ill,
    )


def _pipeline_features(points, config, label):
    tree = KdTree3(points)
    normals = estimate_normals(points, config.k, tree=tree)
    descriptors = compute_fpfh(points, normals, config.k, tree=tree, source=label)
    return tree, normals, descriptors


def register_cf(source, target, config: SolverConfig | None = None) -> RegistrationResult:
    """Full-connection registration: one closed-form step, no initial guess.

    Estimates normals and FPFH descriptors on both clouds, accumulates all
    source-target pairs with similarity weights, and solves. The returned
    transform maps ``source`` into the frame of ``target``.
    """
    config = config or SolverConfig()
    p = check_points(source, "source")
    q = check_points(target, "target")
    if len(p) < config.k or len(q) < config.k:
        raise DegenerateInputError(
            f"clouds must hold at least k={config.k} points, got {len(p)} and {len(q)}"
        )
    timings = {}
    t0 = time.perf_counter()
    _, _, p_desc = _pipeline_features(p, config, "source")
    _, _, q_desc = _pipeline_features(q, config, "target")
    timings["features"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    acc = accumulate_full_connection(p, q, p_desc, q_desc, config)
    timings["accumulate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    result = solve_weighted_closed_form(acc)
    timings["solve"] = time.perf_counter() - t0
    result.timings = timings
    return result


def register_cfk(source, target, config: SolverConfig | None = None) -> RegistrationResult:
    """Keypoint variant: full-connection cost restricted to detected keypoints.

    Descriptors are computed on the full clouds and sampled at keypoint
    indices, so descriptor quality matches register_cf while accumulation
    cost scales with the keypoint counts.
    """
    config = config or SolverConfig()
    p = check_points(source, "source")
    q = check_points(target, "target")
    if len(p) < config.k or len(q) < config.k:
        raise DegenerateInputError(
            f"clouds must hold at least k={config.k} points, got {len(p)} and {len(q)}"
        )
    timings = {}
    t0 = time.perf_counter()
    p_tree, p_normals, p_desc = _pipeline_features(p, config, "source")
    q_tree, q_normals, q_desc = _pipeline_features(q, config, "target")
    timings["features"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    p_keys = detect_keypoints(p, p_normals, config.keypoints, tree=p_tree)
    q_keys = detect_keypoints(q, q_normals, config.keypoints, tree=q_tree)
    timings["keypoints"] = time.perf_counter() - t0
    if len(p_keys) < config.min_keypoints or len(q_keys) < config.min_keypoints:
        raise TooFewKeypointsError(
            f"detected {len(p_keys)}/{len(q_keys)} keypoints but need at least "
            f"{config.min_keypoints} per cloud; fall back to register_cf"
        )

    t0 = time.perf_counter()
    acc = accumulate_full_connection(
        p[p_keys.indices],
        q[q_keys.indices],
        DescriptorSet(p_desc.data[p_keys.indices], config.k, p_desc.source),
        DescriptorSet(q_desc.data[q_keys.indices], config.k, q_desc.source),
        config,
    )
    timings["accumulate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    result = solve_weighted_closed_form(acc)
    timings["solve"] = time.perf_counter() - t0
    result.timings = timings
    result.source_keypoints = len(p_keys)
    result.target_keypoints = len(q_keys)
    return result
