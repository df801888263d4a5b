"""
Changes of variables that send the curved thin gap to a flat box.

All three map kinds share one closed form:

    z'  = s (x' - x0')
    t   = (x_n - g(x') + eps/2) / (eps + f(x') - g(x'))
    z_n = 2 H (t - 1/2)

with (s, x0', H) = (1, 0', 1) for the global map, (4/delta, x0', delta) for
the local map and (1, x0', h_r) for the annulus map.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from core.errors import DomainError
from core.protocol import MapKind
from geometry.gap import GapGeometry, check_closed_disk, delta_scale, gap_profile_values, h_r

# relative slack on the gap fraction before a point counts as outside the gap
FRACTION_TOL = 1e-10


@dataclass(frozen=True)
class FlattenMap:
    kind: MapKind
    geometry: GapGeometry
    x0p: np.ndarray
    lateral_scale: float
    half_height: float
    reference_scale: float
    radius: Optional[float] = None
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False)

    @classmethod
    def global_map(cls, geom: GapGeometry) -> "FlattenMap":
        return cls(
            kind=MapKind.GLOBAL, geometry=geom, x0p=np.zeros(geom.lateral_dimension),
            lateral_scale=1.0, half_height=1.0, reference_scale=1.0,
        )

    @classmethod
    def local(cls, geom: GapGeometry, x0p) -> "FlattenMap":
        """Composite of the delta-rescaling and the vertical flattening at x0'."""
        x0p = np.asarray(x0p, dtype=float)
        delta = delta_scale(geom, x0p)
        return cls(
            kind=MapKind.LOCAL, geometry=geom, x0p=x0p,
            lateral_scale=4.0 / delta, half_height=delta, reference_scale=delta,
            metadata={'delta': delta},
        )

    @classmethod
    def annulus(cls, geom: GapGeometry, x0p, r: float, gamma: float = 0.3, limit: bool = False) -> "FlattenMap":
        x0p = np.asarray(x0p, dtype=float)
        height = h_r(geom, x0p, r, gamma=gamma, limit=limit)
        return cls(
            kind=MapKind.ANNULUS, geometry=geom, x0p=x0p,
            lateral_scale=1.0, half_height=height, reference_scale=1.0, radius=float(r),
            metadata={'h_r': height, 'r': float(r), 'gamma': gamma},
        )

    @property
    def n(self) -> int:
        return self.geometry.n

    def describe(self) -> Dict[str, Any]:
        """Map parameters for result metadata."""
        return {
            'map_kind': self.kind.value,
            'x0p': [float(v) for v in self.x0p],
            'lateral_scale': self.lateral_scale,
            'half_height': self.half_height,
            **self.metadata,
        }


def _split(fmap: FlattenMap, points) -> tuple:
    points = np.asarray(points, dtype=float)
    if points.ndim == 0 or points.shape[-1] != fmap.n:
        raise ValueError(f"expected points of dimension {fmap.n}, got shape {points.shape}")

    return points[..., :-1], points[..., -1]


def _gap_fraction(fmap: FlattenMap, xp: np.ndarray, xn: np.ndarray):
    geom = fmap.geometry
    check_closed_disk(geom, xp)

    f, g, gap = gap_profile_values(geom, xp)
    t = (xn - g + 0.5 * geom.epsilon) / gap
    return t, f, g, gap


def forward(fmap: FlattenMap, x) -> np.ndarray:
    xp, xn = _split(fmap, x)
    t, _, _, _ = _gap_fraction(fmap, xp, xn)

    if np.any(t < -FRACTION_TOL) or np.any(t > 1.0 + FRACTION_TOL):
        raise DomainError("point lies outside the gap between the inclusions")

    zp = fmap.lateral_scale * (xp - fmap.x0p)
    zn = 2.0 * fmap.half_height * (t - 0.5)
    return np.concatenate([zp, zn[..., None]], axis=-1)


def jacobian(fmap: FlattenMap, x) -> np.ndarray:
    """dz/dx with rows z_1..z_n and columns x_1..x_n."""
    xp, xn = _split(fmap, x)
    t, _, _, gap = _gap_fraction(fmap, xp, xn)
    geom = fmap.geometry

    grad_f = geom.f.gradient(xp)
    grad_g = geom.g.gradient(xp)

    n = fmap.n
    J = np.zeros(xp.shape[:-1] + (n, n))
    idx = np.arange(n - 1)
    J[..., idx, idx] = fmap.lateral_scale

    scale = 2.0 * fmap.half_height / gap
    J[..., n - 1, :n - 1] = -scale[..., None] * (grad_g + t[..., None] * (grad_f - grad_g))
    J[..., n - 1, n - 1] = scale
    return J


def jacobian_determinant(fmap: FlattenMap, x) -> np.ndarray:
    xp, xn = _split(fmap, x)
    _, _, _, gap = _gap_fraction(fmap, xp, xn)
    return fmap.lateral_scale ** (fmap.n - 1) * 2.0 * fmap.half_height / gap


def inverse(fmap: FlattenMap, z) -> np.ndarray:
    zp, zn = _split(fmap, z)
    if np.any(np.abs(zn) > fmap.half_height * (1.0 + FRACTION_TOL)):
        raise DomainError(f"flattened point outside |z_n| <= {fmap.half_height}")

    xp = fmap.x0p + zp / fmap.lateral_scale
    geom = fmap.geometry
    check_closed_disk(geom, xp)

    _, g, gap = gap_profile_values(geom, xp)
    t = zn / (2.0 * fmap.half_height) + 0.5
    xn = g - 0.5 * geom.epsilon + t * gap
    return np.concatenate([xp, xn[..., None]], axis=-1)
