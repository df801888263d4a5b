"""
Inclusion boundary profiles near the touching point.

Every profile is a graph x_n = f(x') over the lateral disk with f(0') = 0 and
grad f(0') = 0. Upper profiles describe the lower face of the upper inclusion;
lower profiles are stored as the negated upper formula.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from core.errors import DomainError, UnsupportedFamilyError
from core.protocol import ProfileFamily, Side


@dataclass(frozen=True)
class InclusionProfile:
    family: ProfileFamily
    side: Side
    lateral_dimension: int
    radius: float = 0.0
    matrix: Optional[np.ndarray] = None
    coefficients: Tuple[float, ...] = ()
    table: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)

    @classmethod
    def ball(cls, radius: float, side: Side, lateral_dimension: int) -> "InclusionProfile":
        if radius <= 0:
            raise ValueError(f"ball radius must be positive, got {radius}")

        return cls(ProfileFamily.BALL, Side(side), lateral_dimension, radius=float(radius))

    @classmethod
    def quadratic(cls, matrix: Sequence[Sequence[float]], side: Side) -> "InclusionProfile":
        """f(x') = x'^T P x' for symmetric positive-definite P."""
        P = np.atleast_2d(np.asarray(matrix, dtype=float))
        if P.shape[0] != P.shape[1]:
            raise ValueError(f"quadratic profile needs a square matrix, got shape {P.shape}")

        if not np.array_equal(P, P.T):
            raise ValueError("quadratic profile matrix must be symmetric")

        if np.linalg.eigvalsh(P).min() <= 0:
            raise ValueError("quadratic profile matrix must be positive definite")

        P.setflags(write=False)

        return cls(ProfileFamily.QUADRATIC, Side(side), P.shape[0], matrix=P)

    @classmethod
    def monomials(cls, coefficients: Sequence[float], side: Side, lateral_dimension: int) -> "InclusionProfile":
        """f(x') = sum_k c_k |x'|^(2k) for k = 1, 2, ..."""
        coefficients = tuple(float(c) for c in coefficients)
        if not coefficients or coefficients[0] <= 0:
            raise ValueError("monomial profile needs a positive leading |x'|^2 coefficient")

        return cls(ProfileFamily.MONOMIALS, Side(side), lateral_dimension, coefficients=coefficients)

    @classmethod
    def tabulated(cls, radii: Sequence[float], values: Sequence[float], side: Side,
                  lateral_dimension: int) -> "InclusionProfile":
        """Radial profile sampled at given radii; radii[0] must be 0 and values[0] must be 0."""
        radii = np.asarray(radii, dtype=float)
        values = np.asarray(values, dtype=float)
        if radii.ndim != 1 or radii.shape != values.shape or radii[0] != 0.0 or values[0] != 0.0:
            raise ValueError("tabulated profile needs matching 1D radii/values starting at (0, 0)")

        return cls(ProfileFamily.TABULATED, Side(side), lateral_dimension, table=(radii, values))

    @property
    def sign(self) -> float:
        return 1.0 if self.side == Side.UPPER else -1.0

    @property
    def has_analytic_hessian(self) -> bool:
        return self.family != ProfileFamily.TABULATED

    def _radial_squared(self, xp: np.ndarray) -> np.ndarray:
        return np.sum(xp * xp, axis=-1)

    def _check_lateral(self, xp: np.ndarray) -> np.ndarray:
        xp = np.asarray(xp, dtype=float)
        if xp.shape[-1] != self.lateral_dimension:
            raise ValueError(f"expected lateral points of dimension {self.lateral_dimension}, got {xp.shape}")

        if self.family == ProfileFamily.BALL and np.any(self._radial_squared(xp) > self.radius ** 2):
            raise DomainError(f"ball profile of radius {self.radius} evaluated outside its disk")

        return xp

    def _spline(self) -> CubicSpline:
        radii, values = self.table
        return CubicSpline(radii, values, bc_type=((1, 0.0), 'not-a-knot'))

    def value(self, xp) -> np.ndarray:
        xp = self._check_lateral(xp)
        rho2 = self._radial_squared(xp)

        if self.family == ProfileFamily.BALL:
            # R - sqrt(R^2 - rho^2) written without cancellation near the origin
            root = np.sqrt(self.radius ** 2 - rho2)
            out = rho2 / (self.radius + root)
        elif self.family == ProfileFamily.QUADRATIC:
            out = np.einsum('...i,ij,...j->...', xp, self.matrix, xp)
        elif self.family == ProfileFamily.MONOMIALS:
            out = sum(c * rho2 ** (k + 1) for k, c in enumerate(self.coefficients))
            out = np.asarray(out, dtype=float)
        else:
            out = self._spline()(np.sqrt(rho2))

        return self.sign * out

    def gradient(self, xp) -> np.ndarray:
        xp = self._check_lateral(xp)
        rho2 = self._radial_squared(xp)[..., None]

        if self.family == ProfileFamily.BALL:
            out = xp / np.sqrt(self.radius ** 2 - rho2)
        elif self.family == ProfileFamily.QUADRATIC:
            out = 2.0 * xp @ self.matrix
        elif self.family == ProfileFamily.MONOMIALS:
            radial = sum(c * 2 * (k + 1) * rho2 ** k for k, c in enumerate(self.coefficients))
            out = radial * xp
        else:
            rho = np.sqrt(rho2)
            dfdr = self._spline()(rho, 1)
            with np.errstate(invalid='ignore', divide='ignore'):
                out = np.where(rho > 0, dfdr / np.where(rho > 0, rho, 1.0), 0.0) * xp

        return self.sign * out

    def hessian(self, xp) -> np.ndarray:
        if not self.has_analytic_hessian:
            raise UnsupportedFamilyError(f"profile family {self.family.value} has no analytic Hessian")

        xp = self._check_lateral(xp)
        rho2 = self._radial_squared(xp)[..., None, None]
        eye = np.eye(self.lateral_dimension)
        outer = xp[..., :, None] * xp[..., None, :]

        if self.family == ProfileFamily.BALL:
            s2 = self.radius ** 2 - rho2
            s = np.sqrt(s2)
            out = eye / s + outer / (s2 * s)
        elif self.family == ProfileFamily.QUADRATIC:
            out = np.broadcast_to(2.0 * self.matrix, xp.shape[:-1] + self.matrix.shape).copy()
        else:
            out = np.zeros(xp.shape[:-1] + (self.lateral_dimension, self.lateral_dimension))
            for k, c in enumerate(self.coefficients):
                power = k + 1
                out = out + c * 2 * power * rho2 ** (power - 1) * eye
                if power >= 2:
                    out = out + c * 2 * power * (2 * power - 2) * rho2 ** (power - 2) * outer

        return self.sign * out
