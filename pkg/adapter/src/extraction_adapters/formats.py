"""Byte-level emitters and checkers for the evaluation core's file formats.

The schemas are reimplemented here from their wire definitions on purpose:
the adapter talks to the evaluation suite only through files, and the
validator must catch drift in either implementation.

WWEB embeddings: magic "WWEB", then five little-endian uint32 fields
(version=1, T, rows, cols, d) and T*rows*cols*d little-endian float32.
WWFR raw frames: magic "WWFR", then five little-endian uint32 fields
(version=1, T, H, W, C) and T*H*W*C uint8.
RLE masks: JSON {"height", "width", "frames"}; each frame is a list of
run counts alternating zero-run/one-run starting with zeros, summing to
H*W. Tracks: JSON {"width", "height", "frames"} of per-frame [x, y] lists.
"""

from __future__ import annotations

import json
import math
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

EMBEDDING_MAGIC = b"WWEB"
FRAMES_MAGIC = b"WWFR"
VERSION = 1


def _atomic_write_bytes(path: Path, payload: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_json(path: Path, obj):
    _atomic_write_bytes(
        path, (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode())


# ---------------------------------------------------------------------------
# emitters
# ---------------------------------------------------------------------------

def write_embedding(path, data: np.ndarray):
    """Emit a WWEB file for a (T, rows, cols, d) float array."""
    data = np.ascontiguousarray(data, dtype="<f4")
    if data.ndim != 4:
        raise ValueError(f"expected 4-D embedding data, got {data.shape}")
    header = EMBEDDING_MAGIC + struct.pack("<5I", VERSION, *data.shape)
    _atomic_write_bytes(Path(path), header + data.tobytes())


def encode_mask_counts(mask: np.ndarray) -> list:
    """Row-major run counts, alternating zero/one runs starting with zeros."""
    flat = np.asarray(mask, dtype=bool).ravel()
    counts = []
    current, run = False, 0
    for bit in flat:
        if bit == current:
            run += 1
        else:
            counts.append(run)
            current, run = bit, 1
    counts.append(run)
    if len(counts) == 1 and current:
        counts = [0] + counts
    return counts


def write_mask_file(path, frames_bool, height: int, width: int):
    frames = [encode_mask_counts(f) for f in frames_bool]
    _atomic_write_json(Path(path), {
        "height": height, "width": width, "frames": frames,
    })


def write_track_file(path, frames_points, height: int, width: int):
    frames = [[[float(x), float(y)] for x, y in pts] for pts in frames_points]
    _atomic_write_json(Path(path), {
        "width": width, "height": height, "frames": frames,
    })


# ---------------------------------------------------------------------------
# frame loading
# ---------------------------------------------------------------------------

def load_frames(path) -> np.ndarray:
    """Read frames from a WWFR file or a directory of frame_*.png images."""
    from .errors import EmptyFrames

    p = Path(path)
    if p.is_dir():
        from PIL import Image

        files = sorted(p.glob("frame_*.png"))
        if not files:
            raise EmptyFrames(f"no frame_*.png files under {p}")
        frames = [np.asarray(Image.open(f).convert("RGB")) for f in files]
        return np.stack(frames)
    if not p.exists():
        raise EmptyFrames(f"{p} does not exist")
    blob = p.read_bytes()
    if blob[:4] != FRAMES_MAGIC:
        raise EmptyFrames(f"{p}: not a raw frames file")
    version, T, H, W, C = struct.unpack("<5I", blob[4:24])
    if version != VERSION or T == 0:
        raise EmptyFrames(f"{p}: unsupported version or empty")
    need = T * H * W * C
    payload = np.frombuffer(blob, dtype=np.uint8, offset=24)
    if payload.size != need:
        raise EmptyFrames(f"{p}: expected {need} pixel bytes, got {payload.size}")
    return payload.reshape(T, H, W, C)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def check_embedding_file(path) -> str | None:
    """Return None when valid, else a short failure label."""
    blob = Path(path).read_bytes()
    if blob[:4] != EMBEDDING_MAGIC:
        return "BadMagic"
    if len(blob) < 24:
        return "TruncatedFile"
    version, T, rows, cols, d = struct.unpack("<5I", blob[4:24])
    if version != VERSION:
        return "BadVersion"
    if min(T, rows, cols, d) == 0:
        return "InvalidLength"
    need = T * rows * cols * d * 4
    if len(blob) - 24 < need:
        return "TruncatedFile"
    if len(blob) - 24 > need:
        return "TrailingBytes"
    data = np.frombuffer(blob, dtype="<f4", offset=24)
    if not np.all(np.isfinite(data)):
        return "NonFiniteValue"
    return None


def check_mask_file(path) -> str | None:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError):
        return "BadJson"
    if not isinstance(doc, dict) or {"height", "width", "frames"} - set(doc):
        return "BadSchema"
    h, w = doc["height"], doc["width"]
    if not (isinstance(h, int) and isinstance(w, int) and h > 0 and w > 0):
        return "BadSchema"
    if not isinstance(doc["frames"], list) or not doc["frames"]:
        return "BadSchema"
    for counts in doc["frames"]:
        if not isinstance(counts, list) or not counts:
            return "BadSchema"
        if any(not isinstance(c, int) or c < 0 for c in counts):
            return "BadCounts"
        if sum(counts) != h * w:
            return "LengthMismatch"
    return None


def check_track_file(path) -> str | None:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError):
        return "BadJson"
    if not isinstance(doc, dict) or {"height", "width", "frames"} - set(doc):
        return "BadSchema"
    frames = doc["frames"]
    if not isinstance(frames, list) or not frames:
        return "BadSchema"
    n_points = None
    for pts in frames:
        if not isinstance(pts, list) or not pts:
            return "BadSchema"
        if n_points is None:
            n_points = len(pts)
        elif len(pts) != n_points:
            return "LengthMismatch"
        for pt in pts:
            if (not isinstance(pt, list) or len(pt) != 2
                    or not all(isinstance(v, (int, float))
                               and math.isfinite(v) for v in pt)):
                return "BadPoint"
    return None


_CHECKERS = {
    ".wweb": check_embedding_file,
    ".rle.json": check_mask_file,
    ".tracks.json": check_track_file,
}


def validate_outputs(out_dir) -> list:
    """Check every emitted artifact; returns (name, failure-or-None) pairs."""
    out_dir = Path(out_dir)
    report = []
    for p in sorted(out_dir.iterdir()):
        if not p.is_file():
            continue
        for suffix, checker in _CHECKERS.items():
            if p.name.endswith(suffix):
                report.append((p.name, checker(p)))
                break
    return report
