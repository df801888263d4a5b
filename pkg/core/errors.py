from typing import Any, List, Optional, Sequence

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_ACCEPTANCE = 4


class GapfieldError(Exception):
    """Base class for every failure raised by the lab."""

    exit_code: int = EXIT_NUMERICAL


class ConfigurationError(GapfieldError):
    exit_code = EXIT_CONFIG

    def __init__(self, message: str, keys: Optional[Sequence[str]] = None):
        super().__init__(message)
        self.keys: List[str] = list(keys or [])


class DomainError(GapfieldError):
    """A point lies outside the domain of an operation, or a subdomain is empty."""


class DegenerateDirectionError(DomainError):
    """The retraction direction x0'/|x0'| is undefined at x0' = 0'."""


class UnsupportedFamilyError(GapfieldError):
    """The profile family has no analytic Hessian."""


class OrientationError(GapfieldError):
    """det J <= 0 somewhere on the flattened domain."""

    def __init__(self, message: str, location: Any = None):
        super().__init__(message)
        self.location = location


class GridBudgetError(GapfieldError):

    def __init__(self, message: str, required_cells: int):
        super().__init__(message)
        self.required_cells = required_cells


class AssemblyError(GapfieldError):

    def __init__(self, message: str, location: Any = None):
        super().__init__(message)
        self.location = location


class NonConvergenceError(GapfieldError):

    def __init__(self, message: str, best_iterate, residual_history: Sequence[float]):
        super().__init__(message)
        self.best_iterate = best_iterate
        self.residual_history = list(residual_history)


class NotPositiveDefiniteError(GapfieldError):
    """Conjugate gradients met p^T A p <= 0."""


class PositivityError(GapfieldError):
    """A shifted field is not strictly positive on the Harnack annulus."""


class DegenerateDataError(GapfieldError):
    """Fitting data is non-positive or too short."""


class ResolutionError(GapfieldError):
    """Quadrature samples are too coarse for the smallest dyadic scale."""


class AcceptanceError(GapfieldError):
    exit_code = EXIT_ACCEPTANCE

    def __init__(self, message: str, failures: Optional[Sequence[Any]] = None):
        super().__init__(message)
        self.failures = list(failures or [])
