from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Sequence

import numpy as np


class ProfileFamily(str, Enum):
    BALL = "ball"
    QUADRATIC = "quadratic"
    MONOMIALS = "monomials"
    TABULATED = "tabulated"


class Side(str, Enum):
    UPPER = "upper"
    LOWER = "lower"


class MapKind(str, Enum):
    GLOBAL = "global"
    LOCAL = "local"
    ANNULUS = "annulus"


class CoefficientFamily(str, Enum):
    IDENTITY = "identity"
    SMOOTH = "smooth"
    LAYERED = "layered"


class BoundaryFamily(str, Enum):
    LINEAR = "linear"
    HARMONIC = "harmonic"
    CUSTOM = "custom"


class PreconditionerKind(str, Enum):
    NONE = "none"
    JACOBI = "jacobi"
    LINE = "line"


class FitTarget(str, Enum):
    GLOBAL = "global"
    SEGMENT = "segment"


class DirichletFaces(str, Enum):
    LATERAL = "lateral"
    ALL = "all"
    NONE = "none"


class GapfieldProtocol:

    @staticmethod
    def validate_epsilons(epsilons: Sequence[float], min_length: int = 1) -> bool:
        """Positive, strictly decreasing, long enough."""
        if len(epsilons) < min_length:
            return False

        values = np.asarray(epsilons, dtype=float)
        if np.any(~np.isfinite(values)) or np.any(values <= 0):
            return False

        return bool(np.all(np.diff(values) < 0))

    @staticmethod
    def as_points(points: Any, dimension: int) -> np.ndarray:
        """Coerce to a float array whose last axis has length `dimension`."""
        array = np.asarray(points, dtype=float)
        if array.ndim == 0 or array.shape[-1] != dimension:
            raise ValueError(f"expected points with trailing dimension {dimension}, got shape {array.shape}")

        return array


@dataclass
class PropertyResult:
    """Outcome of one property check run by the validator."""
    module: str
    name: str
    passed: bool
    measured: float
    threshold: float
    error_message: str = ""
    details: Dict[str, Any] = field(default_factory=dict)
