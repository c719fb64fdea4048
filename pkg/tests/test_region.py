import numpy as np
import pytest

from wow_eval.core import EmbeddingSequence, RleMaskSequence, encode_rle
from wow_eval.errors import BadGrid, ShapeMismatch, TooShort
from wow_eval.region_consistency import (
    MrcReport,
    RegionWeights,
    downsample_mask,
    mrc,
    region_feature,
    region_weights,
)


def _mask_seq(frames_bool):
    frames_bool = [np.asarray(f, dtype=bool) for f in frames_bool]
    h, w = frames_bool[0].shape
    return RleMaskSequence(height=h, width=w,
                           frames=tuple(tuple(encode_rle(f)) for f in frames_bool))


def _grids(frames):
    arr = np.asarray(frames, dtype=np.float32)
    T, rows, cols, d = arr.shape
    return EmbeddingSequence(T=T, rows=rows, cols=cols, d=d, data=arr)


# ---------------------------------------------------------------------------
# downsample_mask
# ---------------------------------------------------------------------------

def test_downsample_all_ones():
    assert downsample_mask(np.ones((4, 4)), 2, 2).tolist() == [[1, 1], [1, 1]]


def test_downsample_left_half():
    m = np.zeros((4, 4))
    m[:, :2] = 1
    assert downsample_mask(m, 2, 2).tolist() == [[1, 0], [1, 0]]


def test_downsample_3x3_remainder_bins():
    m = np.zeros((3, 3))
    m[0, 0] = 1
    # bins {rows [0,1],[2]} x {cols [0,1],[2]}
    assert downsample_mask(m, 2, 2).tolist() == [[0.25, 0], [0, 0]]


def test_downsample_bad_grid():
    with pytest.raises(BadGrid):
        downsample_mask(np.ones((2, 2)), 3, 1)


# ---------------------------------------------------------------------------
# region_feature
# ---------------------------------------------------------------------------

def test_region_feature_uniform_weights():
    v = np.array([3.0, 4.0])
    grid = np.tile(v, (2, 2, 1))
    w = RegionWeights(w=np.full((2, 2), 0.25))
    assert region_feature(grid, w) == pytest.approx(v / 5.0)


def test_region_feature_zero_weights():
    grid = np.ones((2, 2, 3))
    f = region_feature(grid, RegionWeights(w=np.zeros((2, 2))))
    assert np.array_equal(f, np.zeros(3))


def test_region_feature_orthogonal_mix():
    v1 = np.array([1.0, 0.0])
    v2 = np.array([0.0, 1.0])
    grid = np.stack([[v1, v2]])  # 1 x 2 x 2
    w = RegionWeights(w=np.array([[0.5, 0.5]]))
    expect = (v1 + v2) / np.sqrt(2)
    assert region_feature(grid, w) == pytest.approx(expect)


def test_region_feature_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        region_feature(np.ones((2, 2, 3)), RegionWeights(w=np.zeros((3, 2))))


def test_region_weights_normalized():
    m = np.zeros((4, 4))
    m[0, 0] = 1
    w = region_weights(m, 2, 2)
    assert w.w.sum() == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# mrc
# ---------------------------------------------------------------------------

def _full(T, h, w):
    return _mask_seq([np.ones((h, w))] * T)


def _empty(T, h, w):
    return _mask_seq([np.zeros((h, w))] * T)


def test_mrc_constant_features_full_masks():
    grid = np.tile(np.array([1.0, 2.0]), (3, 2, 2, 1))
    # obj and arm cover disjoint halves so background is empty -> use partial
    obj = _mask_seq([np.pad(np.ones((2, 2)), ((0, 2), (0, 2)))] * 3)
    arm = _mask_seq([np.pad(np.ones((2, 2)), ((2, 0), (2, 0)))] * 3)
    report = mrc(_grids(grid), obj, arm)
    assert report.mrc_obj == pytest.approx(1.0)
    assert report.mrc_arm == pytest.approx(1.0)
    assert report.mrc_bg == pytest.approx(1.0)


def test_mrc_missing_object_region():
    grid = np.tile(np.array([1.0, 0.0]), (3, 2, 2, 1))
    report = mrc(_grids(grid), _empty(3, 4, 4), _full(3, 4, 4))
    assert report.mrc_obj == 0.0


def test_mrc_bg_zero_when_obj_arm_cover_frame():
    grid = np.tile(np.array([1.0, 0.0]), (3, 2, 2, 1))
    report = mrc(_grids(grid), _full(3, 4, 4), _full(3, 4, 4))
    assert report.mrc_bg == 0.0


def test_mrc_orthogonal_middle_frame():
    # frame 2's object feature orthogonal to frames 1 and 3
    v, u = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    grid = np.stack([np.tile(v, (1, 1, 1)),
                     np.tile(u, (1, 1, 1)),
                     np.tile(v, (1, 1, 1))])
    report = mrc(_grids(grid), _full(3, 2, 2), _full(3, 2, 2))
    assert report.mrc_obj == pytest.approx(0.25)  # s2=0, s3=0.5


def test_mrc_too_short():
    grid = np.ones((1, 2, 2, 3))
    with pytest.raises(TooShort):
        mrc(_grids(grid), _full(1, 2, 2), _full(1, 2, 2))


def test_mrc_scale_invariant():
    rng = np.random.default_rng(0)
    grid = rng.normal(size=(4, 3, 3, 5))
    obj = _mask_seq([rng.random((6, 6)) < 0.4 for _ in range(4)])
    arm = _mask_seq([rng.random((6, 6)) < 0.4 for _ in range(4)])
    a = mrc(_grids(grid), obj, arm)
    b = mrc(_grids(grid * 4.0), obj, arm)
    for field in ("mrc_obj", "mrc_arm", "mrc_bg"):
        assert getattr(a, field) == pytest.approx(getattr(b, field), abs=1e-5)


def test_mrc_anchor_frame_equality_gives_one():
    rng = np.random.default_rng(1)
    frame = rng.normal(size=(2, 2, 4))
    grid = np.stack([frame] * 5)
    report = mrc(_grids(grid), _full(5, 4, 4), _full(5, 4, 4))
    assert report.mrc_obj == pytest.approx(1.0)
    assert report.mrc_arm == pytest.approx(1.0)


def test_mrc_report_type():
    assert MrcReport(0.1, 0.2, 0.3).mrc_bg == 0.3
