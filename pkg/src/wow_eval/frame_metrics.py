"""Per-frame-pair fidelity metrics over temporally aligned videos.

PSNR and SSIM work on 8-bit frames; DINO-cosine and the perceptual
embedding distance work on externally produced per-frame global embeddings.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import EmbeddingSequence, uniform_sample_indices
from .errors import (
    BadMagic,
    DimMismatch,
    FrameTooSmall,
    ShapeMismatch,
    TruncatedFile,
)

FRAMES_MAGIC = b"WWFR"
FRAMES_VERSION = 1

PSNR_SENTINEL_DB = 99.0  # identical frames; keeps the U=50 clip well defined

_SSIM_C1 = (0.01 * 255.0) ** 2
_SSIM_C2 = (0.03 * 255.0) ** 2
_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5

# ITU-R 601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class FrameSequence:
    """T frames of 8-bit pixels, row-major [t][row][col][ch]."""

    pixels: np.ndarray  # (T, H, W, C) uint8

    def __post_init__(self):
        if self.pixels.ndim != 4:
            raise ShapeMismatch("pixels must be (T, H, W, C)")
        if self.pixels.shape[3] not in (1, 3):
            raise ShapeMismatch("channels must be 1 or 3")
        if min(self.pixels.shape) <= 0:
            raise ShapeMismatch("all dims must be positive")

    @property
    def T(self):
        return self.pixels.shape[0]

    @property
    def shape(self):
        return self.pixels.shape[1:]


@dataclass(frozen=True)
class FidelityReport:
    """Fields are present only when their inputs were supplied."""

    psnr_db: float | None = None
    ssim: float | None = None
    dino: float | None = None
    dreamsim: float | None = None


# ---------------------------------------------------------------------------
# Loaders
# ---------------------------------------------------------------------------

_FRAME_RE = re.compile(r"frame_(\d{6})\.png$")


def load_frames(path) -> FrameSequence:
    """Load a frames directory (frame_%06d.png) or a WWFR raw-tensor file."""
    path = Path(path)
    if path.is_dir():
        return _load_frames_dir(path)
    return _load_frames_raw(path)


def _load_frames_dir(path: Path) -> FrameSequence:
    from PIL import Image

    files = sorted(p for p in path.iterdir() if _FRAME_RE.search(p.name))
    if not files:
        raise TruncatedFile(f"{path}: no frame_NNNNNN.png files")
    frames = []
    for f in files:
        arr = np.asarray(Image.open(f))
        if arr.ndim == 2:
            arr = arr[:, :, None]
        frames.append(arr[:, :, :3] if arr.shape[2] > 3 else arr)
    stack = np.stack(frames).astype(np.uint8)
    return FrameSequence(pixels=stack)


def _load_frames_raw(path: Path) -> FrameSequence:
    raw = path.read_bytes()
    if raw[:4] != FRAMES_MAGIC:
        raise BadMagic(f"{path}: expected {FRAMES_MAGIC!r}, got {raw[:4]!r}")
    if len(raw) < 24:
        raise TruncatedFile(f"{path}: header truncated")
    version, T, H, W, C = struct.unpack_from("<5I", raw, 4)
    if version != FRAMES_VERSION:
        raise BadMagic(f"{path}: unsupported version {version}")
    need = 24 + T * H * W * C
    if len(raw) < need:
        raise TruncatedFile(f"{path}: expected {need} bytes, got {len(raw)}")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=T * H * W * C,
                           offset=24).reshape(T, H, W, C).copy()
    return FrameSequence(pixels=pixels)


def write_frames_raw(path, pixels: np.ndarray):
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    T, H, W, C = pixels.shape
    header = FRAMES_MAGIC + struct.pack("<5I", FRAMES_VERSION, T, H, W, C)
    Path(path).write_bytes(header + pixels.tobytes())


# ---------------------------------------------------------------------------
# Temporal alignment (shared with trajectories: sample the longer sequence)
# ---------------------------------------------------------------------------

def _align_pair(a: np.ndarray, b: np.ndarray):
    T = min(len(a), len(b))
    ia = uniform_sample_indices(len(a), T)
    ib = uniform_sample_indices(len(b), T)
    return a[ia], b[ib]


# ---------------------------------------------------------------------------
# PSNR / SSIM
# ---------------------------------------------------------------------------

def psnr_sequence(gen: FrameSequence, gt: FrameSequence) -> float:
    """Mean per-pair 10*log10(255^2 / MSE); MSE=0 pairs contribute 99 dB."""
    if gen.shape != gt.shape:
        raise ShapeMismatch(f"{gen.shape} vs {gt.shape}")
    g, r = _align_pair(gen.pixels, gt.pixels)
    vals = []
    for fg, fr in zip(g.astype(np.float64), r.astype(np.float64)):
        mse = np.mean((fg - fr) ** 2)
        if mse == 0.0:
            vals.append(PSNR_SENTINEL_DB)
        else:
            vals.append(10.0 * np.log10(255.0 ** 2 / mse))
    return float(np.mean(vals))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def _to_luma(frame: np.ndarray) -> np.ndarray:
    if frame.shape[2] == 3:
        return frame.astype(np.float64) @ _LUMA
    return frame[:, :, 0].astype(np.float64)


def _windowed_stats(img: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted local means for every valid 11x11 window position."""
    k = w.shape[0]
    H, W = img.shape
    win = np.lib.stride_tricks.sliding_window_view(img, (k, k))
    return np.einsum("ijkl,kl->ij", win, w)


def ssim_frame(x: np.ndarray, y: np.ndarray) -> float:
    """Mean windowed SSIM of two luma frames (11x11 Gaussian, sigma=1.5)."""
    if x.shape != y.shape:
        raise ShapeMismatch(f"{x.shape} vs {y.shape}")
    if min(x.shape) < _SSIM_WINDOW:
        raise FrameTooSmall(
            f"min(H, W) = {min(x.shape)} < {_SSIM_WINDOW}"
        )
    w = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    mu_x = _windowed_stats(x, w)
    mu_y = _windowed_stats(y, w)
    mu_xx = _windowed_stats(x * x, w)
    mu_yy = _windowed_stats(y * y, w)
    mu_xy = _windowed_stats(x * y, w)
    var_x = mu_xx - mu_x ** 2
    var_y = mu_yy - mu_y ** 2
    cov = mu_xy - mu_x * mu_y
    num = (2 * mu_x * mu_y + _SSIM_C1) * (2 * cov + _SSIM_C2)
    den = (mu_x ** 2 + mu_y ** 2 + _SSIM_C1) * (var_x + var_y + _SSIM_C2)
    return float(np.mean(num / den))


def ssim_sequence(gen: FrameSequence, gt: FrameSequence) -> float:
    """Mean SSIM over aligned frame pairs, computed on luma."""
    if gen.shape != gt.shape:
        raise ShapeMismatch(f"{gen.shape} vs {gt.shape}")
    if min(gen.shape[:2]) < _SSIM_WINDOW:
        raise FrameTooSmall(
            f"min(H, W) = {min(gen.shape[:2])} < {_SSIM_WINDOW}"
        )
    g, r = _align_pair(gen.pixels, gt.pixels)
    vals = [ssim_frame(_to_luma(fg), _to_luma(fr)) for fg, fr in zip(g, r)]
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# Embedding metrics
# ---------------------------------------------------------------------------

def _check_global_pair(gen_emb: EmbeddingSequence, gt_emb: EmbeddingSequence):
    if not (gen_emb.is_global and gt_emb.is_global):
        raise DimMismatch("expected global embeddings (rows=cols=1)")
    if gen_emb.d != gt_emb.d:
        raise DimMismatch(f"d mismatch: {gen_emb.d} vs {gt_emb.d}")


def dino_score(gen_emb: EmbeddingSequence, gt_emb: EmbeddingSequence) -> float:
    """Mean per-frame cosine similarity; zero vectors contribute 0."""
    _check_global_pair(gen_emb, gt_emb)
    g, r = _align_pair(gen_emb.global_vectors(), gt_emb.global_vectors())
    ng = np.linalg.norm(g, axis=1)
    nr = np.linalg.norm(r, axis=1)
    dots = np.einsum("ij,ij->i", g, r)
    ok = (ng > 0) & (nr > 0)
    cos = np.zeros(len(g))
    cos[ok] = dots[ok] / (ng[ok] * nr[ok])
    return float(np.mean(cos))


def dreamsim_score(gen_emb: EmbeddingSequence,
                   gt_emb: EmbeddingSequence) -> float:
    """Mean per-frame (1 - Euclidean distance) over fused embeddings."""
    _check_global_pair(gen_emb, gt_emb)
    g, r = _align_pair(gen_emb.global_vectors(), gt_emb.global_vectors())
    dists = np.linalg.norm(g - r, axis=1)
    return float(np.mean(1.0 - dists))
