"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: parameter misuse -> 1, data or
validation problems -> 2, numeric failures during optimization -> 3.
"""


class ChiralisError(Exception):
    """Base class for all package errors."""


class ParameterError(ChiralisError):
    """An argument value is outside its legal range (e.g. k >= |V|)."""


class MeshFormatError(ChiralisError):
    """A mesh or annotation file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}: "
        if line is not None:
            loc = f"{loc}line {line}: "
        super().__init__(f"{loc}{message}")
        self.path = path
        self.line = line


class ValidationError(ChiralisError):
    """Parsed data violates a structural invariant (bad index, shape, value)."""


class ContainerError(ChiralisError):
    """A binary feature container is malformed, truncated, or corrupt."""


class CheckpointError(ChiralisError):
    """A parameter checkpoint file is malformed, truncated, or corrupt."""


class NumericError(ChiralisError):
    """A non-finite value appeared where finite math was required."""
