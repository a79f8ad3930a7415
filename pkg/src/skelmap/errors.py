"""Exception hierarchy shared by every skelmap module."""


class SkelmapError(Exception):
    """Base class for all errors raised by skelmap."""


class ValidationError(SkelmapError, ValueError):
    """An argument violates a documented precondition."""


class MalformedFile(SkelmapError):
    """A skeleton file has the wrong overall structure."""


class ParseError(SkelmapError):
    """A token or record could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StreamError(SkelmapError):
    """Frames in a stream arrived out of order."""


class DegenerateSkeleton(SkelmapError):
    """Joint geometry does not define a usable body frame or link."""


class LogicError(SkelmapError):
    """An internal operation was asked to do something structurally impossible."""


class ConfigError(SkelmapError):
    """A run configuration is invalid."""


class ModelFormatError(SkelmapError):
    """A model file is corrupt, truncated or of an unsupported version."""
