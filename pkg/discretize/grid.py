"""
Tensor grids on flattened domains.

Lateral axes come first, the vertical axis is last; node arrays are indexed
(i_1, ..., i_n) with the vertical index running fastest in flat storage.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import bittensor as bt
import numpy as np

from config.config import appConfig as config
from core.errors import GridBudgetError
from geometry.gap import GapGeometry

MIN_TARGET_CELLS = 16
MIN_VERTICAL_CELLS = 8


@dataclass(frozen=True)
class TensorGrid:
    axes: Tuple[np.ndarray, ...]
    half_height: float
    lateral_extent: float

    def __post_init__(self):
        if len(self.axes) < 2:
            raise ValueError("a tensor grid needs at least one lateral and one vertical axis")

        for k, axis in enumerate(self.axes):
            if axis.ndim != 1 or len(axis) < 2 or np.any(np.diff(axis) <= 0):
                raise ValueError(f"axis {k} must be strictly increasing with at least two nodes")

        vertical = self.axes[-1]
        if vertical[0] != -self.half_height or vertical[-1] != self.half_height:
            raise ValueError(f"vertical axis must span [-{self.half_height}, {self.half_height}]")

    @property
    def n(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(axis) for axis in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cells(self) -> Tuple[int, ...]:
        return tuple(len(axis) - 1 for axis in self.axes)

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape (*grid.shape, n)."""
        return np.stack(np.meshgrid(*self.axes, indexing='ij'), axis=-1)

    def control_widths(self, k: int) -> np.ndarray:
        """Width of each node's control volume along axis k (half cells at the ends)."""
        axis = self.axes[k]
        h = np.diff(axis)
        widths = np.empty_like(axis)
        widths[0] = 0.5 * h[0]
        widths[-1] = 0.5 * h[-1]
        widths[1:-1] = 0.5 * (h[:-1] + h[1:])
        return widths

    def control_volumes(self) -> np.ndarray:
        volume = np.ones(self.shape)
        for k in range(self.n):
            shape = [1] * self.n
            shape[k] = -1
            volume = volume * self.control_widths(k).reshape(shape)

        return volume

    def min_spacing(self, k: int) -> float:
        return float(np.diff(self.axes[k]).min())

    def lateral_face_mask(self) -> np.ndarray:
        """Nodes on the lateral boundary |z_i| = extent for some lateral axis i."""
        mask = np.zeros(self.shape, dtype=bool)
        for k in range(self.n - 1):
            index = [slice(None)] * self.n
            index[k] = 0
            mask[tuple(index)] = True
            index[k] = -1
            mask[tuple(index)] = True

        return mask

    def boundary_mask(self) -> np.ndarray:
        mask = self.lateral_face_mask()
        mask[..., 0] = True
        mask[..., -1] = True
        return mask

    def interior_mask(self, layers: int = 0) -> np.ndarray:
        """Nodes at least `layers` cells away from every lateral face."""
        mask = np.ones(self.shape, dtype=bool)
        for k in range(self.n - 1):
            index = [slice(None)] * self.n
            index[k] = slice(0, layers + 1)
            mask[tuple(index)] = False
            index[k] = slice(-(layers + 1), None)
            mask[tuple(index)] = False

        return mask

    def describe(self) -> dict:
        return {
            'grid_shape': 'x'.join(str(m) for m in self.shape),
            'lateral_extent': self.lateral_extent,
            'half_height': self.half_height,
            'min_lateral_spacing': self.min_spacing(0),
        }


@dataclass
class DiscreteField:
    grid: TensorGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size != self.grid.size:
            raise ValueError(f"field has {self.values.size} values for {self.grid.size} nodes")

        self.values = self.values.reshape(self.grid.shape)

    @classmethod
    def from_function(cls, grid: TensorGrid, function) -> "DiscreteField":
        return cls(grid, function(grid.nodes()))

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


def uniform_axis(extent: float, cells: int) -> np.ndarray:
    """Symmetric uniform axis on [-extent, extent] with exact endpoints and centre."""
    axis = np.linspace(-extent, extent, cells + 1)
    return _symmetrize(axis, extent)


def _symmetrize(axis: np.ndarray, extent: float) -> np.ndarray:
    half = len(axis) // 2
    axis[:half] = -axis[::-1][:half]
    axis[0], axis[-1] = -extent, extent
    if len(axis) % 2 == 1:
        axis[half] = 0.0

    return axis


def graded_cells_required(extent: float, epsilon: float, c_grade: float) -> int:
    """Even cell count for which sinh grading keeps h(x) <= c_grade * sqrt(eps + x^2)."""
    stretch = math.asinh(extent / math.sqrt(epsilon))
    cells = math.ceil(2.0 * stretch / c_grade)
    return cells + cells % 2


def graded_axis(extent: float, cells: int, epsilon: float) -> np.ndarray:
    """
    x = sqrt(eps) sinh(s) with s uniform on [-S, S], S = asinh(extent/sqrt(eps)).

    dx/ds = sqrt(eps + x^2), so a step ds bounds the local spacing by
    ds * sqrt(eps + x^2) up to higher order terms.
    """
    root = math.sqrt(epsilon)
    stretch = math.asinh(extent / root)
    s = np.linspace(-stretch, stretch, cells + 1)
    return _symmetrize(root * np.sinh(s), extent)


def build_graded_grid(geom: GapGeometry, lateral_extent: float, target_cells: int,
                      c_grade: Optional[float] = None, vertical_cells: Optional[int] = None,
                      half_height: float = 1.0) -> TensorGrid:
    c_grade = config.DEFAULT_C_GRADE if c_grade is None else c_grade
    vertical_cells = config.DEFAULT_VERTICAL_CELLS if vertical_cells is None else vertical_cells

    if target_cells < MIN_TARGET_CELLS:
        raise ValueError(f"target_cells must be at least {MIN_TARGET_CELLS}, got {target_cells}")

    if vertical_cells < MIN_VERTICAL_CELLS:
        raise ValueError(f"vertical axis needs at least {MIN_VERTICAL_CELLS} cells, got {vertical_cells}")

    cells = target_cells + target_cells % 2
    root = math.sqrt(geom.epsilon)

    if 2.0 * lateral_extent / cells <= c_grade * root:
        lateral = uniform_axis(lateral_extent, cells)
        bt.logging.debug(f"📐 Uniform lateral axis: {cells} cells, spacing {2.0 * lateral_extent / cells:.3e}")
    else:
        required = graded_cells_required(lateral_extent, geom.epsilon, c_grade)
        if required > cells:
            raise GridBudgetError(
                f"grading rule needs {required} lateral cells, budget is {cells}", required_cells=required
            )

        lateral = graded_axis(lateral_extent, cells, geom.epsilon)
        bt.logging.debug(f"📐 Graded lateral axis: {cells} cells (required {required}), "
                         f"finest spacing {np.diff(lateral).min():.3e}")

    vertical = uniform_axis(half_height, vertical_cells)
    axes = tuple(lateral.copy() for _ in range(geom.n - 1)) + (vertical,)
    return TensorGrid(axes=axes, half_height=half_height, lateral_extent=lateral_extent)


def box_grid(n: int, lateral_extent: float, half_height: float, lateral_cells: int,
             vertical_cells: int) -> TensorGrid:
    """Uniform grid on [-L, L]^(n-1) x [-H, H]."""
    lateral = uniform_axis(lateral_extent, lateral_cells)
    axes = tuple(lateral.copy() for _ in range(n - 1)) + (uniform_axis(half_height, vertical_cells),)
    return TensorGrid(axes=axes, half_height=half_height, lateral_extent=lateral_extent)
