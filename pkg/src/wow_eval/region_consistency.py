"""Mask-guided regional consistency: per-region temporal feature coherence.

Regions are the manipulated object, the robot arm/gripper, and the
background (complement of the union of the two tracked regions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import EmbeddingSequence, RleMaskSequence
from .errors import BadGrid, ShapeMismatch, TooShort


@dataclass(frozen=True)
class RegionWeights:
    """Patch-grid weights; all-zero when the region is missing, else sum 1."""

    w: np.ndarray  # (rows, cols) non-negative

    def __post_init__(self):
        total = float(self.w.sum())
        if total != 0.0 and not math.isclose(total, 1.0, abs_tol=1e-6):
            raise ShapeMismatch(f"weights sum to {total}, expected 0 or 1")


@dataclass(frozen=True)
class MrcReport:
    mrc_obj: float
    mrc_arm: float
    mrc_bg: float


def _bin_edges(n: int, bins: int):
    # boundaries at round(k * n / bins), matching even partition with the
    # remainder folded into the last bin per axis
    return [int(math.floor(k * n / bins + 0.5)) for k in range(bins + 1)]


def downsample_mask(mask: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Area-average pooling of a boolean mask onto a (rows, cols) grid."""
    mask = np.asarray(mask, dtype=np.float64)
    H, W = mask.shape
    if not (1 <= rows <= H and 1 <= cols <= W):
        raise BadGrid(f"grid ({rows}, {cols}) incompatible with ({H}, {W})")
    re = _bin_edges(H, rows)
    ce = _bin_edges(W, cols)
    out = np.empty((rows, cols))
    for i in range(rows):
        for j in range(cols):
            out[i, j] = mask[re[i]:re[i + 1], ce[j]:ce[j + 1]].mean()
    return out


def region_weights(mask: np.ndarray, rows: int, cols: int) -> RegionWeights:
    """Downsample then normalize to sum 1 (all-zero when region missing)."""
    w = downsample_mask(mask, rows, cols)
    total = w.sum()
    if total > 0:
        w = w / total
    return RegionWeights(w=w)


def region_feature(grid: np.ndarray, weights: RegionWeights) -> np.ndarray:
    """Mask-weighted average of patch vectors, unit-normalized unless zero."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.shape[:2] != weights.w.shape:
        raise ShapeMismatch(f"{grid.shape[:2]} vs {weights.w.shape}")
    f = np.einsum("ij,ijd->d", weights.w, grid)
    norm = np.linalg.norm(f)
    if norm == 0.0:
        return f
    return f / norm


def _consist(fa: np.ndarray, fb: np.ndarray) -> float:
    if np.linalg.norm(fa) > 0 and np.linalg.norm(fb) > 0:
        if np.array_equal(fa, fb):
            # the dot product of a unit vector with itself can round below 1;
            # identical features are exactly consistent by definition
            return 1.0
        return float(fa @ fb)
    return 0.0


def mrc(grids: EmbeddingSequence,
        obj_masks: RleMaskSequence,
        arm_masks: RleMaskSequence) -> MrcReport:
    """Per-region temporal coherence combining long- and short-range terms.

    s_t = 1/2 * Consist(1, t) + 1/2 * Consist(t-1, t) for t = 2..T;
    each region's score is the mean of s_t. The long-range term anchors at
    frame 1 even if that frame's region is missing.
    """
    T = grids.T
    if T < 2:
        raise TooShort(f"need T >= 2 frames, got {T}")
    if obj_masks.num_frames != T or arm_masks.num_frames != T:
        raise ShapeMismatch(
            f"mask frames ({obj_masks.num_frames}, {arm_masks.num_frames}) "
            f"!= embedding frames ({T})"
        )
    rows, cols = grids.rows, grids.cols

    feats = {"obj": [], "arm": [], "bg": []}
    for t, (m_obj, m_arm) in enumerate(zip(obj_masks.decoded(),
                                           arm_masks.decoded())):
        m_bg = ~(m_obj | m_arm)
        grid = grids.data[t]
        for name, m in (("obj", m_obj), ("arm", m_arm), ("bg", m_bg)):
            feats[name].append(region_feature(grid, region_weights(m, rows, cols)))

    scores = {}
    for name, fs in feats.items():
        s = [0.5 * _consist(fs[0], fs[t]) + 0.5 * _consist(fs[t - 1], fs[t])
             for t in range(1, T)]
        scores[name] = float(np.mean(s))
    return MrcReport(mrc_obj=scores["obj"],
                     mrc_arm=scores["arm"],
                     mrc_bg=scores["bg"])
