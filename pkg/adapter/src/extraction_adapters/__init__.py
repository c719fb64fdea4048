"""Artifact-extraction adapters for the wow-eval metric suite."""

from .errors import AdapterError, EmptyFrames, ModelUnavailable, UnknownTask
from .formats import (
    check_embedding_file,
    check_mask_file,
    check_track_file,
    validate_outputs,
)
from .synthetic import TASKS, AdapterJob, extract_artifacts

__all__ = [
    "AdapterError",
    "AdapterJob",
    "EmptyFrames",
    "ModelUnavailable",
    "UnknownTask",
    "TASKS",
    "check_embedding_file",
    "check_mask_file",
    "check_track_file",
    "extract_artifacts",
    "validate_outputs",
]
