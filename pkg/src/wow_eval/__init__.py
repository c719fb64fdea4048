"""Deterministic metric suite and scorecards for generated robot videos."""

from .core import (
    EmbeddingSequence,
    Manifest,
    RleMaskSequence,
    Sample,
    Trajectory2D,
    decode_rle,
    encode_rle,
    load_manifest,
    read_embedding_file,
    uniform_sample_indices,
    write_embedding_file,
)
from .scoring import DEFAULT_MAPPINGS, MappingSpec

__version__ = "0.1.0"

__all__ = [
    "EmbeddingSequence",
    "Manifest",
    "RleMaskSequence",
    "Sample",
    "Trajectory2D",
    "decode_rle",
    "encode_rle",
    "load_manifest",
    "read_embedding_file",
    "uniform_sample_indices",
    "write_embedding_file",
    "DEFAULT_MAPPINGS",
    "MappingSpec",
    "__version__",
]
