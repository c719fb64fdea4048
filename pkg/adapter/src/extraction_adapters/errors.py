"""Adapter exception hierarchy."""


class AdapterError(Exception):
    """Base class for all adapter failures."""


class EmptyFrames(AdapterError):
    """The frames directory holds no readable frames."""


class ModelUnavailable(AdapterError):
    """A requested model identifier is not installed locally."""


class UnknownTask(AdapterError):
    """A task name outside the supported set was requested."""
