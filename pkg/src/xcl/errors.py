"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2,
missing artifacts exit 3, non-finite numerics exit 4.
"""


class XCLError(Exception):
    """Base class for all package errors."""


class ConfigError(XCLError):
    """An argument or configuration value outside its documented domain."""


class ShapeError(XCLError):
    """Array dimensions incompatible with the operation."""


class DataError(XCLError):
    """Input data violates an invariant (empty set, off-simplex vector, ...)."""


class ParseError(XCLError):
    """Malformed file content. Carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ArtifactError(XCLError):
    """A required on-disk artifact (model file, transfer set) is missing."""


class NumericError(XCLError):
    """A non-finite value showed up during training or evaluation."""
