"""Centroid trajectories and trajectory-similarity metrics.

All similarity metrics expect normalized-coordinate trajectories; DTW is
reported as cost per warping-path step so values are length-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RleMaskSequence, Trajectory2D, uniform_sample_indices
from .errors import (
    EmptyTrajectory,
    InvalidLength,
    LengthMismatch,
    NoForeground,
)


@dataclass(frozen=True)
class TrajectoryPairReport:
    l2norm: float
    dtw: float
    frechet: float
    aligned_length: int


def centroid_trajectory(masks: RleMaskSequence) -> Trajectory2D:
    """Per-frame foreground centroid in pixel coordinates.

    Empty-mask frames carry the last valid centroid forward; leading empty
    frames back-fill from the first valid one.
    """
    points = []
    for frame in masks.decoded():
        ys, xs = np.nonzero(frame)
        if len(xs) == 0:
            points.append(None)
        else:
            points.append((float(xs.mean()), float(ys.mean())))
    if all(p is None for p in points):
        raise NoForeground("every frame's mask is empty")
    first_valid = next(p for p in points if p is not None)
    filled = []
    last = first_valid
    for p in points:
        if p is not None:
            last = p
        filled.append(last)
    return Trajectory2D(points=tuple(filled), space="pixel",
                        width=masks.width, height=masks.height)


def normalize_trajectory(traj: Trajectory2D) -> Trajectory2D:
    """Divide pixel coordinates by (W, H)."""
    if traj.space == "normalized":
        return traj
    pts = tuple((x / traj.width, y / traj.height) for x, y in traj.points)
    return Trajectory2D(points=pts, space="normalized")


def normalize_and_resample(traj: Trajectory2D, T_target: int) -> Trajectory2D:
    """Normalize to [0,1]^2 then keep T_target uniformly sampled points."""
    if not (1 <= T_target <= len(traj)):
        raise InvalidLength(
            f"need 1 <= T_target <= {len(traj)}, got {T_target}"
        )
    norm = normalize_trajectory(traj)
    idx = uniform_sample_indices(len(norm), T_target)
    return Trajectory2D(points=tuple(norm.points[i] for i in idx),
                        space="normalized")


def correct_camera(traj: Trajectory2D, camera: Trajectory2D) -> Trajectory2D:
    """Subtract the camera trajectory pointwise; may leave [0,1]^2."""
    if len(traj) != len(camera):
        raise LengthMismatch(f"{len(traj)} vs {len(camera)}")
    pts = tuple((px - cx, py - cy)
                for (px, py), (cx, cy) in zip(traj.points, camera.points))
    return Trajectory2D(points=pts, space="normalized")


def l2norm_error(a: Trajectory2D, b: Trajectory2D) -> float:
    """RMSE of pointwise Euclidean distances between equal-length paths."""
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} vs {len(b)}")
    pa, pb = a.as_array(), b.as_array()
    d2 = np.sum((pa - pb) ** 2, axis=1)
    return float(np.sqrt(d2.mean()))


def dtw_distance(a: Trajectory2D, b: Trajectory2D) -> float:
    """Minimum warping-path cost divided by that path's step count.

    Steps (1,0), (0,1), (1,1); boundary (1,1) -> (T_a, T_b); Euclidean
    cell cost. Among equal-cost paths the shorter one defines the step count.
    """
    pa, pb = _nonempty_arrays(a, b)
    n, m = len(pa), len(pb)
    d = np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=2)
    cost = np.full((n, m), np.inf)
    steps = np.zeros((n, m), dtype=np.int64)
    cost[0, 0] = d[0, 0]
    steps[0, 0] = 1
    for i in range(n):
        for j in range(m):
            if i == 0 and j == 0:
                continue
            best = (np.inf, 0)
            for pi, pj in ((i - 1, j), (i, j - 1), (i - 1, j - 1)):
                if pi >= 0 and pj >= 0:
                    cand = (cost[pi, pj], steps[pi, pj])
                    if cand < best:
                        best = cand
            cost[i, j] = best[0] + d[i, j]
            steps[i, j] = best[1] + 1
    return float(cost[n - 1, m - 1] / steps[n - 1, m - 1])


def discrete_frechet(a: Trajectory2D, b: Trajectory2D) -> float:
    """Minimum leash length over coupled monotone traversals."""
    pa, pb = _nonempty_arrays(a, b)
    n, m = len(pa), len(pb)
    d = np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=2)
    F = np.full((n, m), np.inf)
    F[0, 0] = d[0, 0]
    for i in range(n):
        for j in range(m):
            if i == 0 and j == 0:
                continue
            prev = min(
                F[i - 1, j] if i > 0 else np.inf,
                F[i, j - 1] if j > 0 else np.inf,
                F[i - 1, j - 1] if i > 0 and j > 0 else np.inf,
            )
            F[i, j] = max(d[i, j], prev)
    return float(F[n - 1, m - 1])


def compare_trajectories(a: Trajectory2D, b: Trajectory2D) -> TrajectoryPairReport:
    """Align lengths to the shorter path, then compute all three metrics."""
    T = min(len(a), len(b))
    ia = uniform_sample_indices(len(a), T)
    ib = uniform_sample_indices(len(b), T)
    aa = Trajectory2D(points=tuple(a.points[i] for i in ia), space="normalized")
    bb = Trajectory2D(points=tuple(b.points[i] for i in ib), space="normalized")
    return TrajectoryPairReport(
        l2norm=l2norm_error(aa, bb),
        dtw=dtw_distance(aa, bb),
        frechet=discrete_frechet(aa, bb),
        aligned_length=T,
    )


def _nonempty_arrays(a: Trajectory2D, b: Trajectory2D):
    if len(a) == 0 or len(b) == 0:
        raise EmptyTrajectory("both trajectories must be non-empty")
    return a.as_array(), b.as_array()
