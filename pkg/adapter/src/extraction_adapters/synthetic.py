"""No-model synthetic extraction: procedural embeddings, masks and tracks.

Every artifact is a deterministic function of the frame pixels and the job
seed, so fixture regeneration is bytewise stable while remaining sensitive
to the actual video content.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyFrames, ModelUnavailable, UnknownTask
from .formats import (
    load_frames,
    write_embedding,
    write_mask_file,
    write_track_file,
)

TASKS = ("global_embed", "patch_embed", "masks", "tracks", "clip_features")

SYNTHETIC_MODEL = "synthetic"

GLOBAL_D = 16
PATCH_ROWS, PATCH_COLS, PATCH_D = 4, 3, 16
CLIP_D = 8
CLIP_LEN = 8
N_TRACK_POINTS = 12


@dataclass(frozen=True)
class AdapterJob:
    frames_dir: str
    out_dir: str
    tasks: tuple = TASKS
    model: str = SYNTHETIC_MODEL
    seed: int = 0
    device: str = "cpu"

    def __post_init__(self):
        unknown = set(self.tasks) - set(TASKS)
        if unknown:
            raise UnknownTask(f"unknown tasks: {sorted(unknown)}")
        if not self.tasks:
            raise UnknownTask("no tasks requested")


def _luma(frames: np.ndarray) -> np.ndarray:
    rgb = frames.astype(np.float64)
    return (0.299 * rgb[..., 0] + 0.587 * rgb[..., 1]
            + 0.114 * rgb[..., 2])


def _block_stats(luma: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """(T, rows, cols, 2) per-block mean and standard deviation."""
    T, H, W = luma.shape
    re = [k * H // rows for k in range(rows + 1)]
    ce = [k * W // cols for k in range(cols + 1)]
    out = np.empty((T, rows, cols, 2))
    for i in range(rows):
        for j in range(cols):
            block = luma[:, re[i]:re[i + 1], ce[j]:ce[j + 1]]
            out[:, i, j, 0] = block.mean(axis=(1, 2))
            out[:, i, j, 1] = block.std(axis=(1, 2))
    return out / 255.0


def _projection(rng: np.random.Generator, d_in: int, d_out: int) -> np.ndarray:
    return rng.normal(size=(d_in, d_out)) / np.sqrt(d_in)


def global_embeddings(frames: np.ndarray, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    stats = _block_stats(_luma(frames), 4, 4).reshape(len(frames), -1)
    return (stats @ _projection(rng, stats.shape[1], GLOBAL_D)
            ).reshape(len(frames), 1, 1, GLOBAL_D)


def patch_embeddings(frames: np.ndarray, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed + 1)
    stats = _block_stats(_luma(frames), PATCH_ROWS, PATCH_COLS)
    proj = _projection(rng, stats.shape[-1], PATCH_D)
    return stats @ proj


def clip_features(frames: np.ndarray, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed + 2)
    g = global_embeddings(frames, seed).reshape(len(frames), -1)
    n_clips = (len(frames) + CLIP_LEN - 1) // CLIP_LEN
    pooled = np.stack([g[k * CLIP_LEN:(k + 1) * CLIP_LEN].mean(axis=0)
                       for k in range(n_clips)])
    proj = _projection(rng, pooled.shape[1], CLIP_D)
    return (pooled @ proj).reshape(n_clips, 1, 1, CLIP_D)


def region_masks(frames: np.ndarray):
    """(obj, arm) boolean masks from per-frame luma quantiles."""
    luma = _luma(frames)
    obj, arm = [], []
    for frame in luma:
        hi = np.quantile(frame, 0.8)
        lo = np.quantile(frame, 0.2)
        obj.append(frame >= hi)
        arm.append(frame <= lo)
    return obj, arm


def boundary_tracks(frames: np.ndarray) -> list:
    """Border keypoints displaced by the per-frame luma centroid drift."""
    T, H, W = frames.shape[:3]
    xs = np.linspace(1.0, W - 2.0, 4)
    ys = np.linspace(1.0, H - 2.0, 3)
    base = [(x, ys[0]) for x in xs] + [(x, ys[-1]) for x in xs] \
        + [(xs[0], ys[1]), (xs[-1], ys[1]),
           ((xs[0] + xs[-1]) / 2, ys[1]), (xs[1], ys[1])]
    base = np.asarray(base[:N_TRACK_POINTS])
    luma = _luma(frames)
    yy, xx = np.mgrid[0:H, 0:W]
    centroids = []
    for frame in luma:
        total = frame.sum() or 1.0
        centroids.append((float((frame * xx).sum() / total),
                          float((frame * yy).sum() / total)))
    c0 = np.asarray(centroids[0])
    out = []
    for c in centroids:
        drift = np.asarray(c) - c0
        pts = np.clip(base + drift, 0.0, [W - 1.0, H - 1.0])
        out.append(np.round(pts, 4).tolist())
    return out


def extract_artifacts(job: AdapterJob) -> dict:
    """Run the requested tasks and return a manifest path fragment."""
    if job.model != SYNTHETIC_MODEL:
        raise ModelUnavailable(
            f"model {job.model!r} is not installed; only "
            f"{SYNTHETIC_MODEL!r} runs without weights"
        )
    frames = load_frames(job.frames_dir)
    if len(frames) == 0:
        raise EmptyFrames(f"{job.frames_dir} holds no frames")
    T, H, W = frames.shape[:3]
    out = Path(job.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    fragment = {"embeddings": {}, "masks": {}}
    if "global_embed" in job.tasks:
        write_embedding(out / "global.wweb", global_embeddings(frames, job.seed))
        fragment["embeddings"]["global"] = "global.wweb"
    if "patch_embed" in job.tasks:
        write_embedding(out / "patch.wweb", patch_embeddings(frames, job.seed))
        fragment["embeddings"]["patch"] = "patch.wweb"
    if "clip_features" in job.tasks:
        write_embedding(out / "clip.wweb", clip_features(frames, job.seed))
        fragment["embeddings"]["clip"] = "clip.wweb"
    if "masks" in job.tasks:
        obj, arm = region_masks(frames)
        write_mask_file(out / "obj.rle.json", obj, H, W)
        write_mask_file(out / "arm.rle.json", arm, H, W)
        fragment["masks"] = {"obj": "obj.rle.json", "arm": "arm.rle.json"}
    if "tracks" in job.tasks:
        write_track_file(out / "boundary.tracks.json",
                         boundary_tracks(frames), H, W)
        fragment["tracks"] = "boundary.tracks.json"
    fragment["frame_count"] = int(T)
    fragment["width"] = int(W)
    fragment["height"] = int(H)
    return fragment
