"""
The narrow region between two convex inclusions.

The upper inclusion is bounded below by x_n = eps/2 + f(x'), the lower one
above by x_n = -eps/2 + g(x'). Everything here is a pure function of an
immutable GapGeometry.
"""

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import bittensor as bt
import numpy as np

from core.errors import DegenerateDirectionError, DomainError
from core.protocol import Side
from geometry.profiles import InclusionProfile

DEGENERATE_DIRECTION_TOL = 1e-12
# slack allowed when a tensor grid corner sits exactly on |x'| = R0
CLOSED_DISK_TOL = 1e-12


@dataclass(frozen=True)
class GapGeometry:
    f: InclusionProfile
    g: InclusionProfile
    epsilon: float
    R0: float
    kappa: float
    n: int

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.n}")

        if self.epsilon <= 0 or self.R0 <= 0 or self.kappa <= 0:
            raise ValueError(f"epsilon, R0 and kappa must be positive (got {self.epsilon}, {self.R0}, {self.kappa})")

        if self.f.side != Side.UPPER or self.g.side != Side.LOWER:
            raise ValueError("f must be an upper profile and g a lower profile")

        for profile in (self.f, self.g):
            if profile.lateral_dimension != self.n - 1:
                raise ValueError(f"profile lateral dimension {profile.lateral_dimension} does not match n - 1 = {self.n - 1}")

            if profile.radius and profile.radius < self.R0:
                raise ValueError(f"R0 = {self.R0} exceeds the ball radius {profile.radius}")

    @classmethod
    def balls(cls, radius: float, epsilon: float, R0: float, kappa: float, n: int) -> "GapGeometry":
        """Two balls of equal radius touching the gap from above and below."""
        return cls(
            f=InclusionProfile.ball(radius, Side.UPPER, n - 1),
            g=InclusionProfile.ball(radius, Side.LOWER, n - 1),
            epsilon=epsilon, R0=R0, kappa=kappa, n=n,
        )

    @classmethod
    def quadratic(cls, Q: Sequence[Sequence[float]], epsilon: float, R0: float, kappa: float) -> "GapGeometry":
        """f - g = x'^T Q x', split evenly between the two inclusions."""
        half = 0.5 * np.atleast_2d(np.asarray(Q, dtype=float))
        return cls(
            f=InclusionProfile.quadratic(half, Side.UPPER),
            g=InclusionProfile.quadratic(half, Side.LOWER),
            epsilon=epsilon, R0=R0, kappa=kappa, n=half.shape[0] + 1,
        )

    @property
    def lateral_dimension(self) -> int:
        return self.n - 1

    def with_epsilon(self, epsilon: float) -> "GapGeometry":
        return replace(self, epsilon=float(epsilon))


@dataclass(frozen=True)
class ConvexityReport:
    min_eig: float
    worst_point: np.ndarray
    kappa: float
    sample_count: int

    @property
    def passed(self) -> bool:
        return self.min_eig >= self.kappa


@dataclass(frozen=True)
class WorkingRadius:
    r0: float
    admissible: bool
    delta_limit: float


def _lateral(geom: GapGeometry, xp) -> np.ndarray:
    xp = np.asarray(xp, dtype=float)
    if xp.ndim == 0 or xp.shape[-1] != geom.lateral_dimension:
        raise ValueError(f"expected lateral points of dimension {geom.lateral_dimension}, got shape {xp.shape}")

    return xp


def _check_open_disk(geom: GapGeometry, xp: np.ndarray):
    if np.any(np.linalg.norm(xp, axis=-1) >= geom.R0):
        raise DomainError(f"lateral point outside the open disk |x'| < {geom.R0}")


def check_closed_disk(geom: GapGeometry, xp: np.ndarray):
    """Tolerant membership in |x'| <= R0, used by maps on tensor grids."""
    if np.any(np.linalg.norm(xp, axis=-1) > geom.R0 * (1.0 + CLOSED_DISK_TOL)):
        raise DomainError(f"lateral point outside the closed disk |x'| <= {geom.R0}")


def gap_profile_values(geom: GapGeometry, xp: np.ndarray):
    """(f, g, gap) without the disk check."""
    f = geom.f.value(xp)
    g = geom.g.value(xp)
    return f, g, geom.epsilon + f - g


def gap_height(geom: GapGeometry, xp) -> np.ndarray:
    xp = _lateral(geom, xp)
    _check_open_disk(geom, xp)

    _, _, gap = gap_profile_values(geom, xp)
    return gap


def delta_from(epsilon: float, x0p) -> float:
    """sqrt(eps + |x0'|^2); eps = 0 is allowed here."""
    if epsilon < 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")

    x0p = np.asarray(x0p, dtype=float)
    return float(np.sqrt(epsilon + np.dot(x0p, x0p)))


def delta_scale(geom: GapGeometry, x0p) -> float:
    x0p = _lateral(geom, x0p)
    _check_open_disk(geom, x0p)

    return delta_from(geom.epsilon, x0p)


def retraction_direction(x0p: np.ndarray, limit: bool = False) -> np.ndarray:
    norm = np.linalg.norm(x0p)
    if norm < DEGENERATE_DIRECTION_TOL:
        if not limit:
            raise DegenerateDirectionError("retraction direction undefined at x0' = 0'")

        direction = np.zeros_like(x0p)
        direction[0] = 1.0
        return direction

    return x0p / norm


def h_r(geom: GapGeometry, x0p, r: float, gamma: float = 0.3, limit: bool = False) -> float:
    """
    Gap height at the retracted point x0' - (r/4) x0'/|x0'|.

    With limit=True the direction at x0' = 0' is taken as e1, which is the
    |x0'| -> 0 limit for radially symmetric families.
    """
    x0p = _lateral(geom, x0p)
    direction = retraction_direction(x0p, limit=limit)

    delta = delta_scale(geom, x0p)
    upper = delta ** (1.0 - gamma)
    if not (5.0 * np.linalg.norm(x0p) < r < upper):
        raise DomainError(f"r = {r} outside the admissible window (5|x0'|, delta^(1-gamma)) = "
                          f"({5.0 * np.linalg.norm(x0p)}, {upper})")

    return float(gap_height(geom, x0p - 0.25 * r * direction))


def sunflower_samples(radius: float, count: int, lateral_dimension: int) -> np.ndarray:
    """Quasi-uniform points strictly inside the lateral disk, origin included."""
    if lateral_dimension == 1:
        # midpoints of count equal cells on (-radius, radius), plus 0
        points = radius * (2.0 * (np.arange(count) + 0.5) / count - 1.0)
        return np.concatenate([[0.0], points])[:, None]

    k = np.arange(count)
    rho = radius * np.sqrt((k + 0.5) / count)
    theta = k * np.pi * (3.0 - np.sqrt(5.0))
    points = np.stack([rho * np.cos(theta), rho * np.sin(theta)], axis=-1)
    return np.vstack([np.zeros((1, 2)), points])


def verify_relative_convexity(geom: GapGeometry, sample_count: int) -> ConvexityReport:
    if sample_count < 10:
        raise ValueError(f"sample_count must be at least 10, got {sample_count}")

    points = sunflower_samples(geom.R0, sample_count, geom.lateral_dimension)
    hessian = geom.f.hessian(points) - geom.g.hessian(points)

    eigenvalues = np.linalg.eigvalsh(hessian)[:, 0]
    worst = int(np.argmin(eigenvalues))

    report = ConvexityReport(
        min_eig=float(eigenvalues[worst]),
        worst_point=points[worst].copy(),
        kappa=geom.kappa,
        sample_count=len(points),
    )

    if report.passed:
        bt.logging.debug(f"✅ Relative convexity holds: min eigenvalue {report.min_eig:.6g} >= kappa {geom.kappa}")
    else:
        bt.logging.warning(f"⚠️ Relative convexity fails: min eigenvalue {report.min_eig:.6g} < kappa {geom.kappa} "
                           f"at x' = {report.worst_point}")

    return report


def boundary_normal(geom: GapGeometry, xp, side: Side) -> np.ndarray:
    xp = _lateral(geom, xp)
    _check_open_disk(geom, xp)
    side = Side(side)

    if side == Side.UPPER:
        tangent_slope = -geom.f.gradient(xp)
        vertical = 1.0
    else:
        tangent_slope = geom.g.gradient(xp)
        vertical = -1.0

    normal = np.concatenate([tangent_slope, np.full(xp.shape[:-1] + (1,), vertical)], axis=-1)
    return normal / np.linalg.norm(normal, axis=-1, keepdims=True)


@dataclass(frozen=True)
class GapSubdomain:
    """Omega_{x0,r}: the gap over the lateral disk |x' - x0'| < r."""
    x0p: np.ndarray
    r: float

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError(f"subdomain radius must be positive, got {self.r}")

    def lateral_distance(self, xp) -> np.ndarray:
        return np.linalg.norm(np.asarray(xp, dtype=float) - np.asarray(self.x0p, dtype=float), axis=-1)

    def contains(self, xp) -> np.ndarray:
        return self.lateral_distance(xp) < self.r

    def annulus(self, xp) -> np.ndarray:
        """Omega_{x0,r} minus Omega_{x0,r/2}."""
        distance = self.lateral_distance(xp)
        return (distance >= 0.5 * self.r) & (distance < self.r)

    def validate(self, geom: GapGeometry):
        if self.r > geom.R0:
            raise DomainError(f"subdomain radius {self.r} exceeds R0 = {geom.R0}")


def subdomain_mask(geom: GapGeometry, points, x0p, r: float, annulus: bool = False) -> np.ndarray:
    """
    Membership of physical n-points in Omega_{x0,r} (or its outer annulus).

    Points are taken to lie in the gap already; only the lateral part is tested.
    """
    points = np.asarray(points, dtype=float)
    sub = GapSubdomain(np.asarray(x0p, dtype=float), float(r))
    sub.validate(geom)

    lateral = points[..., :geom.lateral_dimension]
    return sub.annulus(lateral) if annulus else sub.contains(lateral)


def on_boundary_piece(geom: GapGeometry, points, side: Side, tol: float = 1e-12) -> np.ndarray:
    """Whether physical points lie on Gamma_+ (upper) or Gamma_- (lower)."""
    points = np.asarray(points, dtype=float)
    lateral = points[..., :geom.lateral_dimension]
    if Side(side) == Side.UPPER:
        surface = 0.5 * geom.epsilon + geom.f.value(lateral)
    else:
        surface = -0.5 * geom.epsilon + geom.g.value(lateral)

    return np.abs(points[..., -1] - surface) <= tol * max(1.0, geom.epsilon)


def working_radius(geom: GapGeometry, epsilons: Optional[Sequence[float]] = None, gamma: float = 0.3) -> WorkingRadius:
    """
    r0 = min(R0/4, 0.3 R0, r_adm) where r_adm keeps 10 delta < delta^(1-gamma)
    for the largest epsilon. When no such r_adm exists the radius falls back
    to the first two terms and is flagged inadmissible.
    """
    epsilon_max = max(epsilons) if epsilons else geom.epsilon
    delta_limit = 10.0 ** (-1.0 / gamma)

    r0 = min(0.25 * geom.R0, 0.3 * geom.R0)
    admissible = delta_limit ** 2 > epsilon_max
    if admissible:
        r0 = min(r0, float(np.sqrt(delta_limit ** 2 - epsilon_max)))
    else:
        bt.logging.debug(f"⚠️ No admissible working radius: 10 delta < delta^(1-gamma) needs eps < {delta_limit ** 2:.3g}, "
                         f"largest eps is {epsilon_max:.3g}")

    return WorkingRadius(r0=r0, admissible=bool(admissible), delta_limit=delta_limit)
