"""Normalization, aggregation and calibration of metric values.

Raw metric values are clipped to absolute anchors, pre-scaled to [0,1]
(flipped for lower-is-better metrics), passed through a strictly increasing
single-parameter mapping and rescaled to (0,100). Group and overall scores
are weighted arithmetic means. Calibration fits the mapping parameter by
maximizing the Fisher-z averaged Pearson correlation against human ratings
under K-fold cross-validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadTheta,
    ConstantInput,
    DegenerateFold,
    LengthMismatch,
    NegativeWeight,
    NoGroups,
    NoResponses,
    TooFewPoints,
)

_LOGIT_EPS = 1e-6
_TIE_TOL = 1e-9
_FISHER_CLAMP = 1.0 - 1e-7

HIB = "HIB"
LIB = "LIB"

FAMILIES = ("simple", "gamma", "logit", "tanh")

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class MappingSpec:
    metric: str
    direction: str  # HIB | LIB
    L: float
    U: float
    family: str
    theta: float | None = None

    def __post_init__(self):
        if self.direction not in (HIB, LIB):
            raise ValueError(f"direction must be HIB or LIB, got {self.direction}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.L < self.U:
            raise ValueError(f"need L < U, got ({self.L}, {self.U})")
        if self.family != "simple":
            if self.theta is None or self.theta <= 0:
                raise BadTheta(
                    f"{self.metric}: family {self.family!r} needs theta > 0"
                )


# Shipped defaults: published per-metric families and parameters. Anchors
# are theoretical bounds for bounded scales (diameter of the unit square for
# normalized-trajectory distances) and the documented absolute anchors for
# PSNR and FVD.
DEFAULT_MAPPINGS = (
    MappingSpec("fvd", LIB, 0.0, 2000.0, "gamma", 1.52),
    MappingSpec("psnr", HIB, 0.0, 50.0, "tanh", 4.71),
    MappingSpec("ssim", HIB, 0.0, 1.0, "gamma", 0.61),
    MappingSpec("dino", HIB, 0.0, 1.0, "gamma", 3.06),
    MappingSpec("dreamsim", HIB, 0.0, 1.0, "gamma", 2.94),
    MappingSpec("caption", HIB, 0.0, 100.0, "gamma", 0.12),
    MappingSpec("seq_match", HIB, 0.0, 100.0, "gamma", 2.45),
    MappingSpec("exec_quality", HIB, 0.0, 100.0, "gamma", 2.97),
    MappingSpec("planning_dag", HIB, 0.0, 100.0, "simple"),
    MappingSpec("mrc_arm", HIB, 0.0, 1.0, "gamma", 2.93),
    MappingSpec("mrc_obj", HIB, 0.0, 1.0, "tanh", 4.93),
    MappingSpec("mrc_bg", HIB, 0.0, 1.0, "gamma", 3.94),
    MappingSpec("robot_l2norm", LIB, 0.0, _SQRT2, "gamma", 2.86),
    MappingSpec("robot_dtw", LIB, 0.0, _SQRT2, "gamma", 1.87),
    MappingSpec("robot_frechet", LIB, 0.0, _SQRT2, "gamma", 4.00),
    MappingSpec("obj_l2norm", LIB, 0.0, _SQRT2, "gamma", 1.27),
    MappingSpec("obj_dtw", LIB, 0.0, _SQRT2, "gamma", 2.99),
    MappingSpec("obj_frechet", LIB, 0.0, _SQRT2, "gamma", 3.52),
    MappingSpec("physical", HIB, 0.0, 100.0, "simple"),
    MappingSpec("cam_ate", LIB, 0.0, _SQRT2, "simple"),
    MappingSpec("cam_rpe", LIB, 0.0, _SQRT2, "simple"),
)

METRIC_GROUPS = {
    "quality": ("fvd", "psnr", "ssim", "dino", "dreamsim"),
    "instruction": ("caption", "seq_match", "exec_quality"),
    "physical": ("mrc_obj", "mrc_arm", "mrc_bg",
                 "robot_l2norm", "robot_dtw", "robot_frechet",
                 "obj_l2norm", "obj_dtw", "obj_frechet",
                 "physical", "cam_ate", "cam_rpe"),
    "planning": ("planning_dag",),
}

GROUPS = tuple(METRIC_GROUPS)


def metric_group(metric: str) -> str:
    for g, members in METRIC_GROUPS.items():
        if metric in members:
            return g
    raise KeyError(f"metric {metric!r} belongs to no group")


# ---------------------------------------------------------------------------
# Pre-scaling and mapping
# ---------------------------------------------------------------------------

def prescale(x: float, spec: MappingSpec) -> float:
    """Clip to [L, U], map linearly to [0,1], flip for lower-is-better."""
    clipped = min(max(x, spec.L), spec.U)
    hat = (clipped - spec.L) / (spec.U - spec.L)
    return 1.0 - hat if spec.direction == LIB else hat


def apply_mapping(x01: float, spec: MappingSpec) -> float:
    """Evaluate the mapping family at x01 in [0,1], scaled to 0..100."""
    if spec.family == "simple":
        f = x01
    elif spec.family == "gamma":
        f = x01 ** spec.theta
    elif spec.family == "logit":
        xc = min(max(x01, _LOGIT_EPS), 1.0 - _LOGIT_EPS)
        t = math.log(xc / (1.0 - xc)) / spec.theta
        # branch on sign so exp never overflows at extreme temperatures
        if t >= 0:
            f = 1.0 / (1.0 + math.exp(-t))
        else:
            e = math.exp(t)
            f = e / (1.0 + e)
    else:  # tanh
        f = 0.5 * (math.tanh(spec.theta * (2.0 * x01 - 1.0)) + 1.0)
    return 100.0 * f


def map_raw(x: float, spec: MappingSpec) -> float:
    return apply_mapping(prescale(x, spec), spec)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def aggregate_overall(group_scores: dict, weights: dict | None = None):
    """Weighted mean of group means over groups with at least one metric.

    Returns (group means dict, overall). Weights default to 1 per group and
    renormalize over the available groups only.
    """
    available = {g: vals for g, vals in group_scores.items() if vals}
    if not available:
        raise NoGroups("no group has a metric value")
    weights = dict(weights or {})
    for g in available:
        weights.setdefault(g, 1.0)
        if weights[g] < 0:
            raise NegativeWeight(f"group {g!r} has weight {weights[g]}")
    total_w = sum(weights[g] for g in available)
    if total_w <= 0:
        raise NegativeWeight("available group weights sum to zero")
    means = {g: float(np.mean(vals)) for g, vals in available.items()}
    overall = sum(weights[g] / total_w * means[g] for g in available)
    return means, float(overall)


# ---------------------------------------------------------------------------
# Correlation statistics
# ---------------------------------------------------------------------------

def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    nx = np.sqrt(np.sum(xc ** 2))
    ny = np.sqrt(np.sum(yc ** 2))
    if nx == 0 or ny == 0:
        raise ConstantInput("correlation input is constant")
    return float(np.sum(xc * yc) / (nx * ny))


def _average_ranks(v: np.ndarray) -> np.ndarray:
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v), dtype=np.float64)
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0  # mean rank, 1-based
        i = j + 1
    return ranks


def correlations(x, y):
    """(Pearson r, Spearman rho); Spearman uses mean ranks for ties."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise LengthMismatch(f"{len(x)} vs {len(y)}")
    if len(x) < 3:
        raise TooFewPoints(f"need >= 3 points, got {len(x)}")
    r = _pearson(x, y)
    rho = _pearson(_average_ranks(x), _average_ranks(y))
    return r, rho


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------

def _family_values(x01: np.ndarray, family: str, theta: float) -> np.ndarray:
    if family == "gamma":
        return x01 ** theta
    if family == "logit":
        xc = np.clip(x01, _LOGIT_EPS, 1.0 - _LOGIT_EPS)
        t = np.log(xc / (1.0 - xc)) / theta
        with np.errstate(over="ignore"):
            return 1.0 / (1.0 + np.exp(-t))
    if family == "tanh":
        return 0.5 * (np.tanh(theta * (2.0 * x01 - 1.0)) + 1.0)
    raise BadTheta(f"family {family!r} has no free parameter")


def make_folds(n: int, folds: int, seed: int):
    """Contiguous blocks after a seeded shuffle; returned for reproducibility."""
    perm = np.random.default_rng(seed).permutation(n)
    return [perm[i * n // folds:(i + 1) * n // folds] for i in range(folds)]


def fit_mapping_theta(metric_values, human, family: str,
                      grid_max: float = 5.0, grid_step: float = 0.01,
                      folds: int = 5, seed: int = 0):
    """Grid search for the mapping parameter against human ratings.

    For each theta: K-fold CV, per-fold Pearson on the held-out fold,
    Fisher-z average across folds, back-transform; argmax wins. Ties within
    1e-9 break by higher full-data Spearman, then by smaller theta.

    Returns (theta, objective value, fold index lists).
    """
    x = np.asarray(metric_values, dtype=np.float64)
    y = np.asarray(human, dtype=np.float64)
    if len(x) != len(y):
        raise LengthMismatch(f"{len(x)} vs {len(y)}")
    if len(x) < folds * 2:
        raise TooFewPoints(f"need >= {folds * 2} points, got {len(x)}")
    if family == "simple":
        raise BadTheta("family 'simple' has no parameter to fit")
    if grid_step <= 0 or grid_max <= 0:
        raise BadTheta("grid_max and grid_step must be positive")

    fold_idx = make_folds(len(x), folds, seed)
    for f in fold_idx:
        if len(f) < 2 or np.ptp(y[f]) == 0:
            raise DegenerateFold("a fold has constant or too few ratings")

    thetas = np.arange(grid_step, grid_max + grid_step / 2, grid_step)
    best = None  # (objective, spearman, theta)
    for theta in thetas:
        mapped = _family_values(x, family, float(theta))
        zs = []
        ok = True
        for f in fold_idx:
            if np.ptp(mapped[f]) == 0:
                ok = False
                break
            r = _pearson(mapped[f], y[f])
            zs.append(math.atanh(min(max(r, -_FISHER_CLAMP), _FISHER_CLAMP)))
        if not ok:
            continue
        obj = math.tanh(sum(zs) / len(zs))
        _, rho = correlations(mapped, y)
        cand = (obj, rho, float(theta))
        if best is None:
            best = cand
            continue
        if obj > best[0] + _TIE_TOL:
            best = cand
        elif abs(obj - best[0]) <= _TIE_TOL:
            if rho > best[1] + _TIE_TOL:
                best = cand
            # equal objective and spearman: keep the smaller theta (first seen)
    if best is None:
        raise DegenerateFold("every grid point produced a degenerate fold")
    return best[2], best[0], [f.tolist() for f in fold_idx]


# ---------------------------------------------------------------------------
# Deceive-human ratio
# ---------------------------------------------------------------------------

def deceive_ratio(responses):
    """Per model, the fraction of 2AFC responses judged real."""
    if not responses:
        raise NoResponses("no 2AFC responses")
    counts = {}
    for model, judged_real in responses:
        total, real = counts.get(model, (0, 0))
        counts[model] = (total + 1, real + (1 if judged_real else 0))
    return {m: real / total for m, (total, real) in counts.items()}


# ---------------------------------------------------------------------------
# Mapping-spec serialization
# ---------------------------------------------------------------------------

def mappings_to_records(specs):
    out = []
    for s in specs:
        rec = {"metric": s.metric, "direction": s.direction,
               "L": s.L, "U": s.U, "family": s.family}
        if s.theta is not None:
            rec["theta"] = s.theta
        out.append(rec)
    return out


def mappings_from_records(records):
    return tuple(
        MappingSpec(metric=r["metric"], direction=r["direction"],
                    L=r["L"], U=r["U"], family=r["family"],
                    theta=r.get("theta"))
        for r in records
    )
