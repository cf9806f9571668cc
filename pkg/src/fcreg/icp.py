"""Point-to-point ICP baseline.

Alternates gated nearest-neighbor matching with the unweighted closed-form
solve until the transform stops moving, the matched mean squared error stops
changing, or the iteration cap is hit. The fitness criterion follows the
usual library convention of testing the change in MSE between consecutive
iterations rather than its absolute level.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .geometry import RigidTransform, compose
from .kdtree import KdTree3
from .solver import PairAccumulator, RegistrationResult, solve_weighted_closed_form
from .validation import check_points


@dataclass
class IcpParams:
    max_correspondence_distance: float = 0.5
    max_iterations: int = 1000
    transformation_epsilon: float = 1e-9
    euclidean_fitness_epsilon: float = 0.05

    def __post_init__(self):
        for name in (
            "max_correspondence_distance",
            "max_iterations",
            "transformation_epsilon",
            "euclidean_fitness_epsilon",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def register_icp(
    source,
    target,
    params: IcpParams | None = None,
    init: RigidTransform | None = None,
) -> RegistrationResult:
    """Register ``source`` onto ``target`` with point-to-point ICP.

    Correspondences are nearest neighbors within the gating distance; the
    inner solve is the same closed-form routine the full-connection solver
    uses, with unit weights. Termination reasons, iteration count, and the
    per-iteration matched MSE are reported in the result diagnostics. If the
    gate ever rejects every pair the loop stops and returns the best-so-far
    transform with termination ``no_correspondences``.
    """
    params = params or IcpParams()
    p = check_points(source, "source")
    q = check_points(target, "target")
    transform = init if init is not None else RigidTransform.identity()

    t_start = time.perf_counter()
    tree = KdTree3(q)
    gate2 = params.max_correspondence_distance**2
    prev_matrix = transform.matrix()
    prev_mse = np.inf
    mse_history: list[float] = []
    termination = "max_iterations"
    iterations = 0
    last_solve = None

    for iterations in range(1, params.max_iterations + 1):
        moved = transform.apply(p)
        idx, d2 = tree.knn(moved, 1)
        idx, d2 = idx[:, 0], d2[:, 0]
        keep = d2 <= gate2
        if not keep.any():
            termination = "no_correspondences"
            break

        mse = float(d2[keep].mean())
        mse_history.append(mse)

        acc = PairAccumulator.from_correspondences(moved[keep], q[idx[keep]])
        last_solve = solve_weighted_closed_form(acc)
        transform = compose(last_solve.transform, transform)

        matrix = transform.matrix()
        if np.abs(matrix - prev_matrix).max() < params.transformation_epsilon:
            termination = "transformation_epsilon"
            break
        if abs(mse - prev_mse) < params.euclidean_fitness_epsilon:
            termination = "fitness_epsilon"
            break
        prev_matrix = matrix
        prev_mse = mse

    # Final fitness at the returned pose, for reporting.
    moved = transform.apply(p)
    _, d2 = tree.knn(moved, 1)
    d2 = d2[:, 0]
    keep = d2 <= gate2
    final_mse = float(d2[keep].mean()) if keep.any() else float("inf")

    return RegistrationResult(
        transform=transform,
        total_weight=float(keep.sum()),
        pair_count=int(keep.sum()),
        singular_values=last_solve.singular_values if last_solve else np.zeros(3),
        reflection_corrected=last_solve.reflection_corrected if last_solve else False,
        ill_conditioned=last_solve.ill_conditioned if last_solve else True,
        iterations=iterations,
        final_mse=final_mse,
        termination=termination,
        mse_history=mse_history,
        timings={"total": time.perf_counter() - t_start},
    )
