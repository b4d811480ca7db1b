"""Domain exceptions for qudit-noise."""

from typing import Optional, Sequence


class QuditNoiseError(Exception):
    """Base exception for the qudit-noise library."""

    def __init__(self, message: str) -> None:
        self.message = message
        super().__init__(message)


class ConfigurationError(QuditNoiseError):
    """Raised when a run configuration is invalid."""

    def __init__(self, message: str, field: Optional[str] = None) -> None:
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class GeometryError(ConfigurationError):
    """Raised when an electrostatic geometry cannot be built."""

    pass


class DataError(QuditNoiseError):
    """Raised when input data is malformed or insufficient."""

    pass


class StorageError(QuditNoiseError):
    """Raised when artifact storage operations fail."""

    pass


class NumericalError(QuditNoiseError):
    """Base exception for numerical failures."""

    pass


class EigensolverError(NumericalError):
    """Raised when the tridiagonal eigensolver fails."""

    def __init__(self, message: str, n_g: Optional[float] = None) -> None:
        self.n_g = n_g
        super().__init__(message if n_g is None else f"{message} (n_g={n_g})")


class NoInversionError(NumericalError):
    """Raised when a band splitting cannot be inverted to an offset charge."""

    pass


class ConvergenceError(NumericalError):
    """Raised when an iterative routine exhausts its iteration budget."""

    def __init__(self, message: str, history: Sequence[float] = ()) -> None:
        self.history = list(history)
        super().__init__(message)


class FieldSolverError(ConvergenceError):
    """Raised when the relaxation solver does not reach its tolerance."""

    pass


class FitError(ConvergenceError):
    """Raised when a spectral fit fails after all restarts."""

    pass


class InvalidObservationError(NumericalError):
    """Raised when an observation has zero probability under every state."""

    def __init__(self, message: str, index: int) -> None:
        self.index = index
        super().__init__(f"{message} (observation index {index})")


class StageError(QuditNoiseError):
    """Raised when a pipeline stage fails; wraps the underlying error."""

    def __init__(self, stage: str, cause: Exception) -> None:
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
