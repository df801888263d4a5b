"""
Physical gradients of u = w o forward from a solution w on the flattened grid.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from discretize.grid import DiscreteField, TensorGrid
from transform.maps import FlattenMap, inverse, jacobian

BOUNDARY_LAYER_CELLS = 2


@dataclass(frozen=True)
class GradientField:
    grid: TensorGrid
    magnitude: np.ndarray
    components: np.ndarray
    physical_points: np.ndarray

    @property
    def lateral_points(self) -> np.ndarray:
        return self.physical_points[..., :-1]


def flattened_gradient(w: DiscreteField) -> np.ndarray:
    """grad_z w: centred in the interior, second-order one-sided on the faces."""
    parts = np.gradient(w.values, *w.grid.axes, edge_order=2)
    return np.stack(parts, axis=-1)


def gradient_pullback(w: DiscreteField, fmap: Optional[FlattenMap]) -> GradientField:
    """grad_x u = J^T grad_z w with J = dz/dx at each node's preimage; no map means z = x."""
    grad_z = flattened_gradient(w)
    z = w.grid.nodes()

    if fmap is None:
        x = z
        grad_x = grad_z
    else:
        x = inverse(fmap, z)
        J = jacobian(fmap, x)
        grad_x = np.einsum('...ji,...j->...i', J, grad_z)

    return GradientField(
        grid=w.grid,
        magnitude=np.linalg.norm(grad_x, axis=-1),
        components=grad_x,
        physical_points=x,
    )


def nearest_column(gf: GradientField, x0p) -> tuple:
    """Lateral grid index whose (vertical) column sits closest to x' = x0p."""
    x0p = np.asarray(x0p, dtype=float)
    lateral = gf.lateral_points[..., 0, :]
    distance = np.linalg.norm(lateral - x0p, axis=-1)
    return np.unravel_index(int(np.argmin(distance)), distance.shape)


def segment_max_gradient(gf: GradientField, x0p) -> float:
    """max |grad u| over the vertical column of nodes at (nearest) x' = x0p."""
    column = nearest_column(gf, x0p)
    return float(gf.magnitude[column].max())


def max_grad_global(gf: GradientField, exclude_cells: int = BOUNDARY_LAYER_CELLS,
                    radius: Optional[float] = None) -> float:
    """
    max |grad u| away from the lateral Dirichlet faces, optionally only over
    |x'| < radius.
    """
    mask = gf.grid.interior_mask(exclude_cells)
    if radius is not None:
        mask &= np.linalg.norm(gf.lateral_points, axis=-1) < radius

    if not np.any(mask):
        return 0.0

    return float(gf.magnitude[mask].max())


def scaled_gradient(gf: GradientField, epsilon: float, beta: float, u_sup: float) -> np.ndarray:
    """|grad u(x)| (eps + |x'|^2)^(1/2 - beta) / ||u||_inf."""
    if u_sup <= 0:
        return np.zeros_like(gf.magnitude)

    rho2 = np.sum(gf.lateral_points ** 2, axis=-1)
    return gf.magnitude * (epsilon + rho2) ** (0.5 - beta) / u_sup
