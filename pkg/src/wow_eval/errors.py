"""Exception hierarchy shared by all metric modules."""


class WowEvalError(Exception):
    """Base class for every error raised by this package."""


# --- manifest / core ---------------------------------------------------------

class MalformedManifest(WowEvalError):
    pass


class DuplicateSampleId(WowEvalError):
    pass


class MissingField(WowEvalError):
    pass


class LengthMismatch(WowEvalError):
    pass


class BadMagic(WowEvalError):
    pass


class TruncatedFile(WowEvalError):
    pass


class NonFiniteValue(WowEvalError):
    pass


class InvalidLength(WowEvalError):
    pass


# --- frame metrics -----------------------------------------------------------

class ShapeMismatch(WowEvalError):
    pass


class FrameTooSmall(WowEvalError):
    pass


class DimMismatch(WowEvalError):
    pass


# --- distribution metrics ----------------------------------------------------

class TooFewSamples(WowEvalError):
    pass


class NonFiniteInput(WowEvalError):
    pass


class SqrtFailure(WowEvalError):
    pass


# --- region consistency ------------------------------------------------------

class BadGrid(WowEvalError):
    pass


class TooShort(WowEvalError):
    pass


# --- trajectories ------------------------------------------------------------

class NoForeground(WowEvalError):
    pass


class EmptyTrajectory(WowEvalError):
    pass


# --- camera motion -----------------------------------------------------------

class TooFewPoints(WowEvalError):
    pass


class NoConsensus(WowEvalError):
    pass


# --- judge scores ------------------------------------------------------------

class SchemaError(WowEvalError):
    pass


class AllNull(WowEvalError):
    pass


class EmptyGroundTruth(WowEvalError):
    pass


class OutOfRange(WowEvalError):
    pass


# --- scoring / calibration ---------------------------------------------------

class NoGroups(WowEvalError):
    pass


class NegativeWeight(WowEvalError):
    pass


class ConstantInput(WowEvalError):
    pass


class BadTheta(WowEvalError):
    pass


class DegenerateFold(WowEvalError):
    pass


class NoResponses(WowEvalError):
    pass


# --- engine ------------------------------------------------------------------

class NoRecords(WowEvalError):
    pass


class MetricError(WowEvalError):
    """Wraps a module error with (sample id, metric) provenance."""

    def __init__(self, sample_id, metric, cause):
        super().__init__(f"sample {sample_id!r}, metric {metric!r}: {cause}")
        self.sample_id = sample_id
        self.metric = metric
        self.cause = cause
