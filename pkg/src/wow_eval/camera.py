"""Camera-trajectory estimation from boundary point tracks, plus ATE/RPE.

Per-frame transforms are similarity-only (rotation/scale/translation),
fitted reference-frame-to-t with a seeded RANSAC; consecutive translations
are differenced into per-step motion, negated (camera moves opposite to
background), drift-clipped and prefix-summed into a cumulative pixel offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Trajectory2D, uniform_sample_indices
from .errors import NoConsensus, TooFewPoints, TooShort


@dataclass(frozen=True)
class SimilarityTransform:
    """p -> scale * R(angle) p + t."""

    scale: float
    angle: float
    t: tuple

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    def matrix(self) -> np.ndarray:
        c, s = self.scale * math.cos(self.angle), self.scale * math.sin(self.angle)
        return np.array([[c, -s], [s, c]])

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts) @ self.matrix().T + np.asarray(self.t)


@dataclass(frozen=True)
class CameraTrajectory:
    """Cumulative camera offsets in pixels, offsets[0] == (0, 0)."""

    offsets: tuple
    width: int
    height: int

    def __post_init__(self):
        if self.offsets[0] != (0.0, 0.0):
            raise ValueError("first offset must be exactly (0, 0)")

    def __len__(self):
        return len(self.offsets)

    def normalized(self) -> np.ndarray:
        arr = np.asarray(self.offsets, dtype=np.float64)
        return arr / np.array([self.width, self.height], dtype=np.float64)

    def as_trajectory(self) -> Trajectory2D:
        pts = tuple((x / self.width, y / self.height) for x, y in self.offsets)
        return Trajectory2D(points=pts, space="normalized")


@dataclass(frozen=True)
class RansacConfig:
    inlier_threshold_px: float = 2.0
    max_iterations: int = 200
    seed: int = 0
    min_inlier_fraction: float = 0.3
    max_drift_px: float = 30.0

    def __post_init__(self):
        if (self.inlier_threshold_px <= 0 or self.max_iterations <= 0
                or self.min_inlier_fraction <= 0 or self.max_drift_px <= 0):
            raise ValueError("all RANSAC parameters must be positive")


# ---------------------------------------------------------------------------
# Similarity fitting
# ---------------------------------------------------------------------------

def _as_complex(pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64)
    return pts[:, 0] + 1j * pts[:, 1]


def _transform_from_complex(a: complex, b: complex) -> SimilarityTransform:
    return SimilarityTransform(scale=abs(a), angle=math.atan2(a.imag, a.real),
                               t=(b.real, b.imag))


def _exact_two_point(src: np.ndarray, dst: np.ndarray):
    """Similarity through two correspondences via complex division."""
    zs, zd = _as_complex(src), _as_complex(dst)
    denom = zs[1] - zs[0]
    if abs(denom) < 1e-12:
        return None  # coincident sample, degenerate
    a = (zd[1] - zd[0]) / denom
    if abs(a) < 1e-12:
        return None
    b = zd[0] - a * zs[0]
    return a, b


def _least_squares_similarity(src: np.ndarray, dst: np.ndarray):
    """Closed-form LS fit of dst ~ a*src + b in complex form (no reflection)."""
    zs, zd = _as_complex(src), _as_complex(dst)
    ms, md = zs.mean(), zd.mean()
    cs, cd = zs - ms, zd - md
    denom = np.sum(cs.conjugate() * cs).real
    if denom < 1e-12:
        return None
    a = np.sum(cs.conjugate() * cd) / denom
    if abs(a) < 1e-12:
        return None
    b = md - a * ms
    return a, b


def fit_similarity_ransac(src, dst, cfg: RansacConfig = RansacConfig()):
    """Seeded RANSAC similarity fit; returns (transform, inlier mask).

    Minimal sample size 2; coincident samples are resampled and counted
    against the iteration budget; the winning consensus set is refit by
    least squares.
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 2)
    n = len(src)
    if n < 2 or len(dst) != n:
        raise TooFewPoints(f"need >= 2 correspondences, got {n} vs {len(dst)}")
    if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
        raise TooFewPoints("coordinates must be finite")

    rng = np.random.default_rng(cfg.seed)
    zs, zd = _as_complex(src), _as_complex(dst)
    best_mask = None
    best_count = -1
    for _ in range(cfg.max_iterations):
        i, j = rng.choice(n, size=2, replace=False)
        fit = _exact_two_point(src[[i, j]], dst[[i, j]])
        if fit is None:
            continue
        a, b = fit
        residual = np.abs(a * zs + b - zd)
        mask = residual <= cfg.inlier_threshold_px
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
    if best_mask is None or best_count / n < cfg.min_inlier_fraction:
        raise NoConsensus(
            f"best inlier fraction {max(best_count, 0) / n:.2f} below "
            f"{cfg.min_inlier_fraction}"
        )
    refit = _least_squares_similarity(src[best_mask], dst[best_mask])
    if refit is None:
        raise NoConsensus("consensus set is degenerate")
    a, b = refit
    return _transform_from_complex(a, b), best_mask


# ---------------------------------------------------------------------------
# Trajectory accumulation
# ---------------------------------------------------------------------------

def accumulate_camera_trajectory(per_frame_translations, cfg: RansacConfig,
                                 width: int, height: int) -> CameraTrajectory:
    """Negate background translations, clip step magnitudes, prefix-sum.

    Clipping preserves direction and caps magnitude at max_drift_px.
    """
    offsets = [(0.0, 0.0)]
    x = y = 0.0
    for tx, ty in per_frame_translations:
        dx, dy = -tx, -ty
        mag = math.hypot(dx, dy)
        if mag > cfg.max_drift_px:
            f = cfg.max_drift_px / mag
            dx, dy = dx * f, dy * f
        x, y = x + dx, y + dy
        offsets.append((x, y))
    return CameraTrajectory(offsets=tuple(offsets), width=width, height=height)


def camera_trajectory_from_tracks(track_frames, width: int, height: int,
                                  cfg: RansacConfig = RansacConfig()
                                  ) -> CameraTrajectory:
    """Estimate the camera path from index-aligned boundary point tracks.

    Each frame t >= 2 is fit against frame 1 (the reference); per-step
    motion is the difference of consecutive reference-to-t translations.
    """
    if len(track_frames) < 1:
        raise TooShort("need at least one tracked frame")
    ref = np.asarray(track_frames[0], dtype=np.float64).reshape(-1, 2)
    translations = [(0.0, 0.0)]
    for t in range(1, len(track_frames)):
        cur = np.asarray(track_frames[t], dtype=np.float64).reshape(-1, 2)
        transform, _ = fit_similarity_ransac(ref, cur, cfg)
        translations.append(transform.t)
    steps = [(translations[t][0] - translations[t - 1][0],
              translations[t][1] - translations[t - 1][1])
             for t in range(1, len(translations))]
    return accumulate_camera_trajectory(steps, cfg, width, height)


# ---------------------------------------------------------------------------
# ATE / RPE
# ---------------------------------------------------------------------------

def _aligned_normalized(gen: CameraTrajectory, gt: CameraTrajectory):
    T = min(len(gen), len(gt))
    ig = uniform_sample_indices(len(gen), T)
    ir = uniform_sample_indices(len(gt), T)
    return gen.normalized()[ig], gt.normalized()[ir]


def ate(gen: CameraTrajectory, gt: CameraTrajectory) -> float:
    """RMSE of normalized cumulative offsets after length alignment."""
    g, r = _aligned_normalized(gen, gt)
    d2 = np.sum((g - r) ** 2, axis=1)
    return float(np.sqrt(d2.mean()))


def rpe(gen: CameraTrajectory, gt: CameraTrajectory, delta: int = 1) -> float:
    """RMSE of relative motion differences at temporal offset delta."""
    g, r = _aligned_normalized(gen, gt)
    T = len(g)
    if T <= delta:
        raise TooShort(f"aligned length {T} <= delta {delta}")
    vg = g[delta:] - g[:-delta]
    vr = r[delta:] - r[:-delta]
    d2 = np.sum((vg - vr) ** 2, axis=1)
    return float(np.sqrt(d2.mean()))
