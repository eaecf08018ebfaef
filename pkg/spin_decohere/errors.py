"""Exception hierarchy for spin-decohere.

Every error carries the process exit code the CLI reports for it.
"""

from typing import Optional


class SpinDecohereError(Exception):
    """Base exception for spin-decohere errors."""

    exit_code = 1


class InvalidParameterError(SpinDecohereError, ValueError):
    """Raised when a model, state or propagator argument is invalid."""

    pass


class ConfigError(SpinDecohereError):
    """Raised when a run configuration document is invalid."""

    exit_code = 2

    def __init__(self, key: str, reason: str, line: Optional[int] = None):
        self.key = key
        self.reason = reason
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{key}: {reason}{where}")


class DimensionError(SpinDecohereError):
    """Raised when a Hilbert space is too large for the requested operation."""

    exit_code = 3


class NumericalError(SpinDecohereError):
    """Raised when a propagation fails numerically."""

    exit_code = 4

    def __init__(self, message: str, algorithm: Optional[str] = None):
        self.algorithm = algorithm
        prefix = f"{algorithm}: " if algorithm else ""
        super().__init__(f"{prefix}{message}")


class SeedFailure(NumericalError):
    """Raised when one seed of an averaging batch fails."""

    def __init__(self, seed: int, cause: BaseException):
        self.seed = seed
        super().__init__(f"seed {seed} failed: {cause}")
