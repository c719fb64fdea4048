import numpy as np
import pytest

from wow_eval.core import EmbeddingSequence
from wow_eval.errors import DimMismatch, FrameTooSmall, ShapeMismatch
from wow_eval.frame_metrics import (
    FrameSequence,
    dino_score,
    dreamsim_score,
    load_frames,
    psnr_sequence,
    ssim_frame,
    ssim_sequence,
    write_frames_raw,
)


def _frames(pixels):
    return FrameSequence(pixels=np.asarray(pixels, dtype=np.uint8))


def _global_emb(vectors):
    arr = np.asarray(vectors, dtype=np.float32)
    return EmbeddingSequence(T=arr.shape[0], rows=1, cols=1, d=arr.shape[1],
                             data=arr.reshape(arr.shape[0], 1, 1, -1))


RNG = np.random.default_rng(7)


# ---------------------------------------------------------------------------
# PSNR
# ---------------------------------------------------------------------------

def test_psnr_identical_is_sentinel():
    f = _frames(RNG.integers(0, 256, (3, 16, 16, 3)))
    assert psnr_sequence(f, f) == 99.0


def test_psnr_unit_mse_closed_form():
    base = RNG.integers(0, 255, (2, 16, 16, 1)).astype(np.uint8)
    other = base + 1
    got = psnr_sequence(_frames(base), _frames(other))
    assert got == pytest.approx(10 * np.log10(65025), abs=1e-9)
    assert got == pytest.approx(48.13, abs=0.01)


def test_psnr_channel_mismatch():
    with pytest.raises(ShapeMismatch):
        psnr_sequence(_frames(np.zeros((2, 8, 8, 3))),
                      _frames(np.zeros((2, 8, 8, 1))))


def test_psnr_decreases_with_noise_amplitude():
    base = RNG.integers(0, 256, (4, 24, 24, 3)).astype(np.int32)
    values = []
    for amp in (1, 4, 16):
        noise = np.random.default_rng(42).integers(-amp, amp + 1, base.shape)
        noisy = np.clip(base + noise, 0, 255).astype(np.uint8)
        values.append(psnr_sequence(_frames(base.astype(np.uint8)),
                                    _frames(noisy)))
    assert values[0] > values[1] > values[2]


def test_psnr_symmetric():
    a = _frames(RNG.integers(0, 256, (3, 12, 12, 3)))
    b = _frames(RNG.integers(0, 256, (3, 12, 12, 3)))
    assert psnr_sequence(a, b) == psnr_sequence(b, a)


# ---------------------------------------------------------------------------
# SSIM
# ---------------------------------------------------------------------------

def _brute_force_ssim(x, y):
    """Loop-based windowed SSIM; independent oracle for the vectorized path."""
    k, sigma = 11, 1.5
    ax = np.arange(k) - (k - 1) / 2
    g = np.exp(-(ax ** 2) / (2 * sigma ** 2))
    w = np.outer(g, g)
    w /= w.sum()
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    H, W = x.shape
    vals = []
    for i in range(H - k + 1):
        for j in range(W - k + 1):
            wx = x[i:i + k, j:j + k]
            wy = y[i:i + k, j:j + k]
            mx, my = (w * wx).sum(), (w * wy).sum()
            vx = (w * wx * wx).sum() - mx ** 2
            vy = (w * wy * wy).sum() - my ** 2
            cov = (w * wx * wy).sum() - mx * my
            vals.append(((2 * mx * my + c1) * (2 * cov + c2))
                        / ((mx ** 2 + my ** 2 + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


def test_ssim_identical_is_one():
    f = _frames(RNG.integers(0, 256, (2, 16, 16, 3)))
    assert ssim_sequence(f, f) == pytest.approx(1.0, abs=1e-12)


def test_ssim_matches_brute_force_oracle():
    x = RNG.integers(0, 256, (14, 15)).astype(np.float64)
    y = RNG.integers(0, 256, (14, 15)).astype(np.float64)
    assert ssim_frame(x, y) == pytest.approx(_brute_force_ssim(x, y), abs=1e-12)


def test_ssim_inversion_is_negative():
    # 11x11 gradient fixture: inverting a non-constant frame flips structure
    grad = np.tile(np.linspace(0, 255, 11), (11, 1))
    inv = 255.0 - grad
    assert ssim_frame(grad, inv) < 0
    assert ssim_frame(grad, inv) == pytest.approx(
        _brute_force_ssim(grad, inv), abs=1e-12)


def test_ssim_frame_too_small():
    with pytest.raises(FrameTooSmall):
        ssim_sequence(_frames(np.zeros((1, 8, 8, 1))),
                      _frames(np.zeros((1, 8, 8, 1))))


def test_ssim_in_range_and_symmetric():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        a = _frames(rng.integers(0, 256, (1, 12, 12, 1)))
        b = _frames(rng.integers(0, 256, (1, 12, 12, 1)))
        s = ssim_sequence(a, b)
        assert -1 <= s <= 1
        assert s == ssim_sequence(b, a)


# ---------------------------------------------------------------------------
# embedding metrics
# ---------------------------------------------------------------------------

def test_dino_identical_unit_vectors():
    v = np.eye(4)[:3]
    assert dino_score(_global_emb(v), _global_emb(v)) == pytest.approx(1.0)


def test_dino_orthogonal_and_opposite():
    a = _global_emb([[1, 0], [0, 1]])
    b = _global_emb([[0, 1], [1, 0]])
    assert dino_score(a, b) == pytest.approx(0.0)
    c = _global_emb([[-1, 0], [0, -1]])
    assert dino_score(a, c) == pytest.approx(-1.0)


def test_dino_scale_invariant_and_symmetric():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(5, 8))
    b = rng.normal(size=(5, 8))
    base = dino_score(_global_emb(a), _global_emb(b))
    # inputs are stored as float32, so rescaling perturbs at that precision
    assert dino_score(_global_emb(a * 7.3), _global_emb(b)) == \
        pytest.approx(base, abs=1e-6)
    assert dino_score(_global_emb(b), _global_emb(a)) == \
        pytest.approx(base, abs=1e-12)


def test_dino_zero_vector_contributes_zero():
    a = _global_emb([[0, 0], [1, 0]])
    b = _global_emb([[1, 0], [1, 0]])
    assert dino_score(a, b) == pytest.approx(0.5)


def test_dino_dim_mismatch():
    with pytest.raises(DimMismatch):
        dino_score(_global_emb(np.ones((2, 3))), _global_emb(np.ones((2, 4))))


def test_dreamsim_hand_cases():
    a = _global_emb([[0.0, 0.0], [0.0, 0.0]])
    b = _global_emb([[0.1, 0.0], [0.3, 0.0]])
    assert dreamsim_score(a, a) == pytest.approx(1.0)
    assert dreamsim_score(a, b) == pytest.approx(0.8)
    c = _global_emb([[0.25, 0.0]])
    d = _global_emb([[0.0, 0.0]])
    assert dreamsim_score(c, d) == pytest.approx(0.75)


def test_dreamsim_symmetric():
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
    assert dreamsim_score(_global_emb(a), _global_emb(b)) == \
        dreamsim_score(_global_emb(b), _global_emb(a))


# ---------------------------------------------------------------------------
# loaders
# ---------------------------------------------------------------------------

def test_raw_frames_round_trip(tmp_path):
    px = RNG.integers(0, 256, (3, 6, 7, 3)).astype(np.uint8)
    p = tmp_path / "f.wwfr"
    write_frames_raw(p, px)
    assert np.array_equal(load_frames(p).pixels, px)


def test_png_frames_dir(tmp_path):
    from PIL import Image

    px = RNG.integers(0, 256, (2, 6, 7, 3)).astype(np.uint8)
    for t in range(2):
        Image.fromarray(px[t]).save(tmp_path / f"frame_{t:06d}.png")
    assert np.array_equal(load_frames(tmp_path).pixels, px)
