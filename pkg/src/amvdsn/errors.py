"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 2,
numeric failures with 3, file problems with 4.
"""


class AMVDSNError(Exception):
    """Base class for package errors."""


class ConfigError(AMVDSNError, ValueError):
    """Invalid configuration value, or incompatible setup detected before running."""


class ShapeError(ConfigError):
    """Operands or tensors with incompatible dimensions."""


class NumericError(AMVDSNError, ArithmeticError):
    """Numerical failure: divergence (NaN/Inf loss) or an eigensolver that did not converge."""


class DataFormatError(AMVDSNError, ValueError):
    """Malformed dataset file; the message names the offending file (and line when known)."""

    def __init__(self, message, path=None, line=None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if path is not None:
            where = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + where)


class CheckpointError(AMVDSNError, ValueError):
    """Unreadable or inconsistent checkpoint file."""
