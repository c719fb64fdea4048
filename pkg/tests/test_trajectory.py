import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wow_eval.core import RleMaskSequence, Trajectory2D, encode_rle
from wow_eval.errors import InvalidLength, LengthMismatch, NoForeground
from wow_eval.trajectory import (
    centroid_trajectory,
    compare_trajectories,
    correct_camera,
    discrete_frechet,
    dtw_distance,
    l2norm_error,
    normalize_and_resample,
)


def _traj(points, space="normalized", **kw):
    return Trajectory2D(points=tuple(points), space=space, **kw)


def _mask_seq(frames_bool):
    frames_bool = [np.asarray(f, dtype=bool) for f in frames_bool]
    h, w = frames_bool[0].shape
    return RleMaskSequence(height=h, width=w,
                           frames=tuple(tuple(encode_rle(f)) for f in frames_bool))


# ---------------------------------------------------------------------------
# brute-force oracles
# ---------------------------------------------------------------------------

def _all_warping_paths(n, m):
    """Every monotone path from (0,0) to (n-1,m-1) with steps (1,0),(0,1),(1,1)."""
    paths = []

    def extend(path):
        i, j = path[-1]
        if (i, j) == (n - 1, m - 1):
            paths.append(list(path))
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            ni, nj = i + di, j + dj
            if ni < n and nj < m:
                path.append((ni, nj))
                extend(path)
                path.pop()

    extend([(0, 0)])
    return paths


def _dist(p, q):
    # explicit multiply + sqrt, bit-identical to a vectorized norm reduction
    dx, dy = p[0] - q[0], p[1] - q[1]
    return math.sqrt(dx * dx + dy * dy)


def brute_force_dtw(pa, pb):
    best_cost, best_len = math.inf, None
    for path in _all_warping_paths(len(pa), len(pb)):
        cost = 0.0
        for i, j in path:
            cost += _dist(pa[i], pb[j])
        if cost < best_cost or (cost == best_cost and len(path) < best_len):
            best_cost, best_len = cost, len(path)
    return best_cost / best_len


def brute_force_frechet(pa, pb):
    best = math.inf
    for path in _all_warping_paths(len(pa), len(pb)):
        leash = max(_dist(pa[i], pb[j]) for i, j in path)
        best = min(best, leash)
    return best


# ---------------------------------------------------------------------------
# centroid / normalization / camera
# ---------------------------------------------------------------------------

def test_centroid_midpoint():
    frame = np.zeros((3, 5), dtype=bool)
    frame[1, 1] = frame[1, 3] = True
    traj = centroid_trajectory(_mask_seq([frame]))
    assert traj.points == ((2.0, 1.0),)


def test_centroid_carry_forward():
    full = np.zeros((5, 5), dtype=bool)
    full[2, 2] = True
    empty = np.zeros((5, 5), dtype=bool)
    traj = centroid_trajectory(_mask_seq([full, empty, full]))
    assert traj.points == ((2.0, 2.0),) * 3


def test_centroid_backfill_leading_empty():
    full = np.zeros((4, 4), dtype=bool)
    full[1, 3] = True
    traj = centroid_trajectory(_mask_seq([np.zeros((4, 4)), full]))
    assert traj.points == ((3.0, 1.0), (3.0, 1.0))


def test_centroid_no_foreground():
    with pytest.raises(NoForeground):
        centroid_trajectory(_mask_seq([np.zeros((3, 3))] * 2))


def test_normalize_and_resample():
    traj = _traj([(2, 1), (4, 2), (0, 0), (2, 2), (4, 0)],
                 space="pixel", width=4, height=2)
    out = normalize_and_resample(traj, 3)
    assert out.space == "normalized"
    assert out.points == ((0.5, 0.5), (0.0, 0.0), (1.0, 0.0))
    same = normalize_and_resample(traj, 5)
    assert len(same) == 5
    with pytest.raises(InvalidLength):
        normalize_and_resample(traj, 6)


def test_correct_camera():
    p = _traj([(0.5, 0.5), (0.6, 0.6)])
    zero = _traj([(0.0, 0.0)] * 2)
    assert correct_camera(p, zero).points == p.points
    assert correct_camera(p, p).points == ((0.0, 0.0), (0.0, 0.0))
    cam = _traj([(0.1, -0.2), (0.1, -0.2)])
    out = correct_camera(p, cam)
    assert out.points[0] == pytest.approx((0.4, 0.7))
    with pytest.raises(LengthMismatch):
        correct_camera(p, _traj([(0, 0)]))


# ---------------------------------------------------------------------------
# l2norm
# ---------------------------------------------------------------------------

def test_l2norm_hand_cases():
    a = _traj([(0, 0), (1, 1)])
    assert l2norm_error(a, a) == 0.0
    b = _traj([(0.1, 0), (1.1, 1)])
    assert l2norm_error(a, b) == pytest.approx(0.1)
    c = _traj([(0.3, 0), (0, 0)])
    d = _traj([(0, 0), (0.4, 0)])
    assert l2norm_error(c, d) == pytest.approx(math.sqrt((0.09 + 0.16) / 2))


def test_l2norm_translation_covariant():
    rng = np.random.default_rng(0)
    a = rng.random((6, 2))
    b = rng.random((6, 2))
    shift = np.array([1.7, -2.3])
    before = l2norm_error(_traj(map(tuple, a)), _traj(map(tuple, b)))
    after = l2norm_error(_traj(map(tuple, a + shift)),
                         _traj(map(tuple, b + shift)))
    assert after == pytest.approx(before, abs=1e-12)


# ---------------------------------------------------------------------------
# DTW
# ---------------------------------------------------------------------------

def test_dtw_hand_cases():
    a = _traj([(0, 0), (2, 0)])
    assert dtw_distance(a, a) == 0.0
    assert dtw_distance(_traj([(0, 0)]), _traj([(1, 0)])) == 1.0
    b = _traj([(0, 0), (1, 0), (2, 0)])
    assert dtw_distance(a, b) == pytest.approx(1 / 3)


def test_frechet_hand_cases():
    a = _traj([(0, 0), (1, 0)])
    b = _traj([(0, 1), (1, 1)])
    assert discrete_frechet(a, a) == 0.0
    assert discrete_frechet(a, b) == pytest.approx(1.0)
    assert discrete_frechet(_traj([(0, 0)]),
                            _traj([(0, 0), (0, 3)])) == pytest.approx(3.0)


def test_dtw_frechet_match_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(60):
        na, nb = rng.integers(1, 7, size=2)
        pa = rng.random((na, 2))
        pb = rng.random((nb, 2))
        a, b = _traj(map(tuple, pa)), _traj(map(tuple, pb))
        assert dtw_distance(a, b) == brute_force_dtw(pa, pb)
        assert discrete_frechet(a, b) == brute_force_frechet(pa, pb)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_dtw_frechet_symmetric(seed):
    rng = np.random.default_rng(seed)
    na, nb = rng.integers(1, 9, size=2)
    a = _traj(map(tuple, rng.random((na, 2))))
    b = _traj(map(tuple, rng.random((nb, 2))))
    assert dtw_distance(a, b) == pytest.approx(dtw_distance(b, a), abs=1e-12)
    assert discrete_frechet(a, b) == discrete_frechet(b, a)


@given(st.integers(0, 2**31 - 1))
def test_self_distance_zero(seed):
    rng = np.random.default_rng(seed)
    a = _traj(map(tuple, rng.random((int(rng.integers(1, 10)), 2))))
    assert dtw_distance(a, a) == 0.0
    assert discrete_frechet(a, a) == 0.0


def test_frechet_endpoint_lower_bounds():
    rng = np.random.default_rng(2)
    for _ in range(50):
        pa = rng.random((int(rng.integers(1, 8)), 2))
        pb = rng.random((int(rng.integers(1, 8)), 2))
        f = discrete_frechet(_traj(map(tuple, pa)), _traj(map(tuple, pb)))
        assert f >= np.linalg.norm(pa[0] - pb[0]) - 1e-12
        assert f >= np.linalg.norm(pa[-1] - pb[-1]) - 1e-12


def test_compare_trajectories_report():
    a = _traj([(0, 0), (0.5, 0), (1, 0)])
    b = _traj([(0, 0.1), (1, 0.1)])
    report = compare_trajectories(a, b)
    assert report.aligned_length == 2
    assert report.l2norm == pytest.approx(0.1)
    assert report.frechet >= max(0.1, 0.1) - 1e-12
    assert np.isfinite(report.dtw)
