from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from core.protocol import BoundaryFamily, DirichletFaces
from discretize.grid import TensorGrid
from transform.maps import FlattenMap, inverse

HARMONIC_TRACE_TOL = 1e-14


@dataclass(frozen=True)
class BoundaryData:
    """Background potential H whose trace is the Dirichlet data."""
    family: BoundaryFamily
    n: int
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    direction: Optional[np.ndarray] = None
    quadratic: Optional[np.ndarray] = None
    constant: float = 0.0

    @classmethod
    def linear(cls, direction: Sequence[float], constant: float = 0.0) -> "BoundaryData":
        d = np.asarray(direction, dtype=float)

        def evaluate(x):
            return np.asarray(x, dtype=float) @ d + constant

        return cls(BoundaryFamily.LINEAR, len(d), evaluate, direction=d, constant=float(constant))

    @classmethod
    def coordinate(cls, n: int, axis: int = 0) -> "BoundaryData":
        """H = x_{axis+1}."""
        direction = np.zeros(n)
        direction[axis] = 1.0
        return cls.linear(direction)

    @classmethod
    def zero(cls, n: int) -> "BoundaryData":
        return cls.linear(np.zeros(n))

    @classmethod
    def harmonic(cls, matrix: Sequence[Sequence[float]], direction: Optional[Sequence[float]] = None,
                 constant: float = 0.0) -> "BoundaryData":
        """H = x^T M x + d.x + c with trace(M) = 0, so H is harmonic."""
        M = np.asarray(matrix, dtype=float)
        M = 0.5 * (M + M.T)
        n = M.shape[0]
        if abs(np.trace(M)) > HARMONIC_TRACE_TOL * max(1.0, np.abs(M).max()):
            raise ValueError(f"quadratic part must be trace free to be harmonic, trace is {np.trace(M)}")

        d = np.zeros(n) if direction is None else np.asarray(direction, dtype=float)

        def evaluate(x):
            x = np.asarray(x, dtype=float)
            return np.einsum('...i,ij,...j->...', x, M, x) + x @ d + constant

        return cls(BoundaryFamily.HARMONIC, n, evaluate, direction=d, quadratic=M, constant=float(constant))

    @classmethod
    def custom(cls, n: int, function: Callable[[np.ndarray], np.ndarray]) -> "BoundaryData":
        """Arbitrary data, harmonicity is the caller's business."""
        return cls(BoundaryFamily.CUSTOM, n, function)

    def __call__(self, x) -> np.ndarray:
        return self.evaluator(x)

    @property
    def is_zero(self) -> bool:
        if self.family == BoundaryFamily.CUSTOM:
            return False

        quadratic_zero = self.quadratic is None or not np.any(self.quadratic)
        return quadratic_zero and not np.any(self.direction) and self.constant == 0.0


def dirichlet_mask(grid: TensorGrid, faces: DirichletFaces) -> np.ndarray:
    faces = DirichletFaces(faces)
    if faces == DirichletFaces.LATERAL:
        return grid.lateral_face_mask()

    if faces == DirichletFaces.ALL:
        return grid.boundary_mask()

    return np.zeros(grid.shape, dtype=bool)


def dirichlet_trace(bc: BoundaryData, fmap: Optional[FlattenMap], grid: TensorGrid,
                    faces: DirichletFaces = DirichletFaces.LATERAL) -> np.ndarray:
    """
    H(inverse(z)) on Dirichlet nodes, zero elsewhere, shaped like the grid.

    A map of None means the grid already lives in physical coordinates.
    """
    mask = dirichlet_mask(grid, faces)
    values = np.zeros(grid.shape)
    if not np.any(mask):
        return values

    z = grid.nodes()[mask]
    x = z if fmap is None else inverse(fmap, z)
    values[mask] = bc(x)
    return values
