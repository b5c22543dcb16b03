"""Exception types shared across the library."""


class HassvmError(Exception):
    """Base class for all errors raised by this library."""


class DimensionError(HassvmError):
    """Vector or matrix shapes are inconsistent."""


class InvalidCategoryError(HassvmError):
    """A category label is outside the valid 1..K range."""


class DegenerateProblemError(HassvmError):
    """The problem is degenerate (e.g. fewer than two categories)."""


class TreeValidationError(HassvmError):
    """An adaptation tree violates a structural invariant."""


class DatasetParseError(HassvmError):
    """A dataset file could not be parsed; the message names the line."""


class ModelFormatError(HassvmError):
    """A model file has an unknown version or a corrupted payload."""


class ProtocolError(HassvmError):
    """An experiment protocol cannot be satisfied by the data."""


class ConfigError(HassvmError):
    """A configuration file or option set is invalid."""
