"""Domain types, manifest ingestion, RLE mask codec and embedding I/O.

Everything here is immutable after construction and safe to share across
workers.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    DuplicateSampleId,
    InvalidLength,
    LengthMismatch,
    MalformedManifest,
    MissingField,
    NonFiniteValue,
    TruncatedFile,
)

EMBEDDING_MAGIC = b"WWEB"
EMBEDDING_VERSION = 1

MASK_REGIONS = ("obj", "arm")


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RleMaskSequence:
    """Per-frame binary masks, row-major RLE starting with the zero-run."""

    height: int
    width: int
    frames: tuple  # tuple of tuples of run counts

    def __post_init__(self):
        area = self.height * self.width
        for i, counts in enumerate(self.frames):
            if sum(counts) != area:
                raise LengthMismatch(
                    f"frame {i}: counts sum to {sum(counts)}, expected {area}"
                )

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    def decoded(self):
        """Yield each frame as an (H, W) boolean array."""
        for counts in self.frames:
            yield decode_rle(counts, self.height, self.width)


@dataclass(frozen=True)
class EmbeddingSequence:
    """T x (rows x cols) x d grid of finite feature vectors."""

    T: int
    rows: int
    cols: int
    d: int
    data: np.ndarray  # shape (T, rows, cols, d), float32

    def __post_init__(self):
        if self.T < 1 or self.d < 1 or self.rows < 1 or self.cols < 1:
            raise InvalidLength("T, rows, cols and d must all be >= 1")
        if self.data.shape != (self.T, self.rows, self.cols, self.d):
            raise LengthMismatch(
                f"data shape {self.data.shape} != "
                f"{(self.T, self.rows, self.cols, self.d)}"
            )
        if not np.all(np.isfinite(self.data)):
            idx = int(np.flatnonzero(~np.isfinite(self.data))[0])
            raise NonFiniteValue(f"non-finite value at flat index {idx}")

    @property
    def is_global(self) -> bool:
        return self.rows == 1 and self.cols == 1

    def global_vectors(self) -> np.ndarray:
        """(T, d) view for rows=cols=1 sequences."""
        return self.data.reshape(self.T, self.d)


@dataclass(frozen=True)
class Trajectory2D:
    """Ordered 2-D points in pixel or normalized image coordinates."""

    points: tuple  # tuple of (x, y) float pairs
    space: str  # "pixel" | "normalized"
    width: int | None = None
    height: int | None = None

    def __post_init__(self):
        if len(self.points) < 1:
            raise InvalidLength("trajectory must contain at least one point")
        if self.space not in ("pixel", "normalized"):
            raise ValueError(f"unknown space {self.space!r}")
        if self.space == "pixel" and (self.width is None or self.height is None):
            raise MissingField("pixel-space trajectory requires width and height")
        for x, y in self.points:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise NonFiniteValue(f"non-finite point ({x}, {y})")

    def __len__(self):
        return len(self.points)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=np.float64)


_SAMPLE_KEYS = {
    "id", "instruction", "dimension_tags", "model",
    "gen_frames_dir", "gt_frames_dir",
    "gen_masks", "gt_masks",
    "gen_embeddings", "gt_embeddings",
    "gen_tracks", "gt_tracks",
    "judge_outputs", "width", "height", "frame_counts",
}

_REQUIRED_SAMPLE_KEYS = {"id", "instruction", "width", "height"}


@dataclass(frozen=True)
class Sample:
    """One benchmark entry: instruction plus artifact and judge-output paths.

    GT-dependent paths are optional; metrics needing them are skipped, never
    defaulted, when absent.
    """

    id: str
    instruction: str
    width: int
    height: int
    model: str = ""
    dimension_tags: frozenset = frozenset()
    gen_frames_dir: str | None = None
    gt_frames_dir: str | None = None
    gen_masks: dict = field(default_factory=dict)
    gt_masks: dict = field(default_factory=dict)
    gen_embeddings: dict = field(default_factory=dict)
    gt_embeddings: dict = field(default_factory=dict)
    gen_tracks: str | None = None
    gt_tracks: str | None = None
    judge_outputs: dict = field(default_factory=dict)
    frame_counts: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise MalformedManifest(
                f"sample {self.id!r}: width*height must be positive"
            )
        for name, count in self.frame_counts.items():
            if not isinstance(count, int) or count <= 0:
                raise MalformedManifest(
                    f"sample {self.id!r}: frame count {name!r} must be a "
                    f"positive integer"
                )

    def referenced_paths(self):
        """All artifact paths this sample points at (relative strings)."""
        paths = []
        for p in (self.gen_frames_dir, self.gt_frames_dir,
                  self.gen_tracks, self.gt_tracks):
            if p is not None:
                paths.append(p)
        for m in (self.gen_masks, self.gt_masks,
                  self.gen_embeddings, self.gt_embeddings,
                  self.judge_outputs):
            paths.extend(m.values())
        return paths

    def missing_paths(self, base_dir: Path):
        base = Path(base_dir)
        return [p for p in self.referenced_paths() if not (base / p).exists()]


@dataclass(frozen=True)
class Manifest:
    samples: tuple
    dataset_name: str
    version: str

    def __post_init__(self):
        if not self.samples:
            raise MalformedManifest("manifest contains no samples")
        seen = set()
        for s in self.samples:
            if s.id in seen:
                raise DuplicateSampleId(s.id)
            seen.add(s.id)

    def models(self):
        """Model names in first-appearance order."""
        out = []
        for s in self.samples:
            if s.model not in out:
                out.append(s.model)
        return out


# ---------------------------------------------------------------------------
# Manifest ingestion
# ---------------------------------------------------------------------------

def _parse_sample(raw: dict, dataset_name: str) -> Sample:
    if not isinstance(raw, dict):
        raise MalformedManifest("sample entry is not an object")
    sid = raw.get("id", "<missing id>")
    unknown = set(raw) - _SAMPLE_KEYS
    if unknown:
        raise MalformedManifest(
            f"sample {sid!r}: unknown keys {sorted(unknown)}"
        )
    missing = _REQUIRED_SAMPLE_KEYS - set(raw)
    if missing:
        raise MissingField(f"sample {sid!r}: missing {sorted(missing)}")
    for key in ("gen_masks", "gt_masks", "gen_embeddings", "gt_embeddings",
                "judge_outputs", "frame_counts"):
        if key in raw and not isinstance(raw[key], dict):
            raise MalformedManifest(f"sample {sid!r}: {key} must be a mapping")
    try:
        return Sample(
            id=raw["id"],
            instruction=raw["instruction"],
            width=raw["width"],
            height=raw["height"],
            model=raw.get("model", dataset_name),
            dimension_tags=frozenset(raw.get("dimension_tags", [])),
            gen_frames_dir=raw.get("gen_frames_dir"),
            gt_frames_dir=raw.get("gt_frames_dir"),
            gen_masks=dict(raw.get("gen_masks", {})),
            gt_masks=dict(raw.get("gt_masks", {})),
            gen_embeddings=dict(raw.get("gen_embeddings", {})),
            gt_embeddings=dict(raw.get("gt_embeddings", {})),
            gen_tracks=raw.get("gen_tracks"),
            gt_tracks=raw.get("gt_tracks"),
            judge_outputs=dict(raw.get("judge_outputs", {})),
            frame_counts=dict(raw.get("frame_counts", {})),
        )
    except TypeError as exc:
        raise MalformedManifest(f"sample {sid!r}: {exc}") from exc


def load_manifest(path) -> Manifest:
    """Parse and validate a manifest document.

    Checks all Sample invariants but never opens referenced artifact files;
    path existence is a validate-time concern (``Sample.missing_paths``).
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedManifest(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedManifest(f"{path}: top level must be an object")
    unknown = set(doc) - {"samples", "dataset_name", "version"}
    if unknown:
        raise MalformedManifest(f"{path}: unknown keys {sorted(unknown)}")
    for key in ("samples", "dataset_name", "version"):
        if key not in doc:
            raise MissingField(f"{path}: missing top-level key {key!r}")
    if not isinstance(doc["samples"], list) or not doc["samples"]:
        raise MalformedManifest(f"{path}: samples must be a non-empty list")
    samples = tuple(
        _parse_sample(raw, doc["dataset_name"]) for raw in doc["samples"]
    )
    return Manifest(samples=samples,
                    dataset_name=doc["dataset_name"],
                    version=doc["version"])


# ---------------------------------------------------------------------------
# RLE codec (row-major, first count is the leading zero-run)
# ---------------------------------------------------------------------------

def decode_rle(counts, height: int, width: int) -> np.ndarray:
    """Expand run counts into an (H, W) boolean mask.

    Counts alternate zero-run / one-run starting with zeros; an all-zero
    frame is ``[height * width]``.
    """
    counts = list(counts)
    total = sum(counts)
    if total != height * width:
        raise LengthMismatch(
            f"counts sum to {total}, expected {height * width}"
        )
    values = np.arange(len(counts)) % 2 == 1
    flat = np.repeat(values, counts)
    return flat.reshape(height, width)


def encode_rle(mask: np.ndarray):
    """Inverse of :func:`decode_rle`; round-trips every mask exactly."""
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return []
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [flat.size]))
    runs = (ends - starts).tolist()
    if flat[0]:  # leading run must count zeros
        runs = [0] + runs
    return [int(r) for r in runs]


def load_rle_file(path) -> RleMaskSequence:
    """Read the JSON RLE schema {"height", "width", "frames"}."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedManifest(f"{path}: {exc}") from exc
    try:
        return RleMaskSequence(
            height=doc["height"],
            width=doc["width"],
            frames=tuple(tuple(f) for f in doc["frames"]),
        )
    except KeyError as exc:
        raise MissingField(f"{path}: missing key {exc}") from exc


# ---------------------------------------------------------------------------
# Embedding files ("WWEB")
# ---------------------------------------------------------------------------

def read_embedding_file(path) -> EmbeddingSequence:
    """Read a WWEB binary: magic, u32 version, u32 T/rows/cols/d, f32 data."""
    raw = Path(path).read_bytes()
    if raw[:4] != EMBEDDING_MAGIC:
        raise BadMagic(f"{path}: expected {EMBEDDING_MAGIC!r}, got {raw[:4]!r}")
    if len(raw) < 24:
        raise TruncatedFile(f"{path}: header truncated")
    version, T, rows, cols, d = struct.unpack_from("<5I", raw, 4)
    if version != EMBEDDING_VERSION:
        raise BadMagic(f"{path}: unsupported version {version}")
    expected = 24 + 4 * T * rows * cols * d
    if len(raw) < expected:
        raise TruncatedFile(
            f"{path}: payload holds {len(raw) - 24} bytes, "
            f"expected {expected - 24}"
        )
    data = np.frombuffer(raw, dtype="<f4", count=T * rows * cols * d, offset=24)
    bad = ~np.isfinite(data)
    if bad.any():
        raise NonFiniteValue(
            f"{path}: non-finite value at flat index {int(np.flatnonzero(bad)[0])}"
        )
    return EmbeddingSequence(
        T=T, rows=rows, cols=cols, d=d,
        data=data.reshape(T, rows, cols, d).copy(),
    )


def write_embedding_file(path, data: np.ndarray):
    """Write a (T, rows, cols, d) float array in the WWEB schema."""
    data = np.ascontiguousarray(data, dtype="<f4")
    if data.ndim != 4:
        raise LengthMismatch("embedding data must be 4-dimensional")
    T, rows, cols, d = data.shape
    header = EMBEDDING_MAGIC + struct.pack("<5I", EMBEDDING_VERSION,
                                           T, rows, cols, d)
    Path(path).write_bytes(header + data.tobytes())


# ---------------------------------------------------------------------------
# Track files
# ---------------------------------------------------------------------------

def load_track_file(path):
    """Read the JSON track schema: per-frame point lists, index-aligned.

    Returns (width, height, frames) where frames is a list of (N, 2) arrays.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedManifest(f"{path}: {exc}") from exc
    for key in ("width", "height", "frames"):
        if key not in doc:
            raise MissingField(f"{path}: missing key {key!r}")
    frames = [np.asarray(f, dtype=np.float64).reshape(-1, 2)
              for f in doc["frames"]]
    if frames and any(f.shape != frames[0].shape for f in frames):
        raise LengthMismatch(f"{path}: point lists not index-aligned")
    return doc["width"], doc["height"], frames


# ---------------------------------------------------------------------------
# Index alignment
# ---------------------------------------------------------------------------

def uniform_sample_indices(T_src: int, T_target: int):
    """Pick T_target indices uniformly from range(T_src), endpoints kept.

    index(t) = round(t * (T_src - 1) / (T_target - 1)) with half-up ties;
    trajectories and frames stay at observed samples (no interpolation).
    """
    if not (1 <= T_target <= T_src):
        raise InvalidLength(
            f"need 1 <= T_target <= T_src, got ({T_src}, {T_target})"
        )
    if T_target == 1:
        return [0]
    step = (T_src - 1) / (T_target - 1)
    return [int(math.floor(t * step + 0.5)) for t in range(T_target)]
