"""
Layered-media machinery: the scale-weighted Y^{s,p} norm, the piecewise
constant companion of a layered coefficient, and the layer-count experiment.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import bittensor as bt
import numpy as np

from analysis.gradient import gradient_pullback
from core.errors import ResolutionError
from core.protocol import DirichletFaces, PreconditionerKind
from discretize.assembly import HARMONIC, assemble
from discretize.boundary import BoundaryData
from discretize.grid import box_grid
from solve.cg import cg_solve
from transform.coefficients import LayerBlock, LayeredPartition

DYADIC_LEVELS = 9
MIN_POINTS_PER_AXIS = 4


def cylinder_midpoints(n: int, r: float, points_per_axis: int) -> np.ndarray:
    """Midpoint nodes of a uniform box partition of rS = {|x'| < r, |x_n| < r}, restricted to the cylinder."""
    centres = r * (2.0 * (np.arange(points_per_axis) + 0.5) / points_per_axis - 1.0)
    nodes = np.stack(np.meshgrid(*([centres] * n), indexing='ij'), axis=-1).reshape(-1, n)
    if n > 2:
        nodes = nodes[np.linalg.norm(nodes[:, :-1], axis=-1) < r]

    return nodes


def _pointwise_norm(values: np.ndarray, count: int) -> np.ndarray:
    """|F| per sample; Frobenius norm for vector or matrix values."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        return np.abs(values)

    return np.sqrt(np.sum(values.reshape(count, -1) ** 2, axis=-1))


def y_norm(F: Callable[[np.ndarray], np.ndarray], s: float, p: float, n: int,
           points_per_axis: int = 64, levels: int = DYADIC_LEVELS) -> float:
    """
    max over r = 1, 1/2, ..., 2^-(levels-1) of r^(1-s) (mean_{rS} |F|^p)^(1/p).

    The mean is a midpoint rule on each rS, so every dyadic level is resolved
    by the same number of nodes.
    """
    if not (1.0 < p < np.inf):
        raise ValueError(f"integrability exponent must lie in (1, inf), got {p}")

    if points_per_axis < MIN_POINTS_PER_AXIS:
        raise ResolutionError(f"{points_per_axis} points per axis cannot resolve rS; need at least {MIN_POINTS_PER_AXIS}")

    best = 0.0
    for k in range(levels):
        r = 2.0 ** -k
        nodes = cylinder_midpoints(n, r, points_per_axis)
        magnitude = _pointwise_norm(F(nodes), len(nodes))
        mean = float(np.mean(magnitude ** p))
        best = max(best, r ** (1.0 - s) * mean ** (1.0 / p))

    return best


def piecewise_constant_approx(partition: LayeredPartition) -> LayeredPartition:
    """
    A-bar: on layer m0 the value A(0); above it the limit toward (0', c_{m-1});
    below it the limit toward (0', c_m).
    """
    n = partition.n
    m0 = partition.m0
    blocks = []
    for m in range(1, partition.layer_count + 1):
        anchor = np.zeros(n)
        if m > m0:
            anchor[-1] = partition.cuts[m - 1]
        elif m < m0:
            anchor[-1] = partition.cuts[m]

        blocks.append(LayerBlock.constant(partition.layer_value(m, anchor)))

    return LayeredPartition(cuts=partition.cuts.copy(), layers=tuple(blocks))


def mean_over_cylinder(H: Callable[[np.ndarray], np.ndarray], n: int, points_per_axis: int = 64) -> float:
    """Midpoint approximation of the average of H over S."""
    nodes = cylinder_midpoints(n, 1.0, points_per_axis)
    return float(np.mean(H(nodes)))


@dataclass(frozen=True)
class LayeredResult:
    layer_count: int
    seed: int
    grad_ratio: float
    y_norm_ratio: float
    coefficient_y_norm: float
    max_layer_seminorm: float
    background_y_norm: float
    cg_iterations: int


def layer_y_norm_ratio(partition: LayeredPartition, mu: float, points_per_axis: int = 64,
                       seed: int = 0) -> tuple:
    """(||A - A-bar||_{Y^{1+mu,2}}, max_m sampled C^mu seminorm of A on layer m)."""
    bar = piecewise_constant_approx(partition)
    norm = y_norm(lambda x: partition.evaluate(x) - bar.evaluate(x), 1.0 + mu, 2.0, partition.n, points_per_axis)
    seminorm = float(partition.sampled_seminorms(mu, seed=seed).max())
    return norm, seminorm


def layered_gradient_experiment(layer_count: int, seed: int, n: int = 2, cells: int = 128,
                                mu: float = 0.5, amplitude: float = 0.3,
                                bc: Optional[BoundaryData] = None,
                                partition: Optional[LayeredPartition] = None,
                                tol: Optional[float] = None, workers: Optional[int] = None,
                                points_per_axis: int = 64) -> LayeredResult:
    """
    Solve div(A grad u) = 0 on [-1, 1]^n with u = H on the whole boundary and
    return ||grad u||_{L^inf(S/2)} / ||u||_{L^2(S)} along with the Y-norm ratio
    of A - A-bar.
    """
    partition = LayeredPartition.random(layer_count, n, seed, amplitude_max=amplitude) if partition is None else partition
    bc = BoundaryData.coordinate(n) if bc is None else bc

    grid = box_grid(n, 1.0, 1.0, cells, cells)
    system = assemble(partition.evaluate, grid, bc, None, faces=DirichletFaces.ALL,
                      vertical_average=HARMONIC, workers=workers)
    u, report = cg_solve(system, tol=tol, preconditioner=PreconditionerKind.LINE)

    l2 = float(np.sqrt(np.sum(u.values ** 2 * grid.control_volumes())))
    if l2 == 0.0:
        grad_ratio = 0.0
    else:
        gradient = gradient_pullback(u, None)
        half = np.all(np.abs(grid.nodes()) <= 0.5 + 1e-12, axis=-1)
        grad_ratio = float(gradient.magnitude[half].max()) / l2

    if all(block.is_constant for block in partition.layers) and partition.layer_count == 1:
        coefficient_norm, seminorm = 0.0, 0.0
    else:
        coefficient_norm, seminorm = layer_y_norm_ratio(partition, mu, points_per_axis, seed)

    ratio = coefficient_norm / seminorm if seminorm > 0 else 0.0

    background_mean = mean_over_cylinder(bc, n, points_per_axis)
    background_norm = y_norm(lambda x: bc(x) - background_mean, mu, 2.0, n, points_per_axis)

    bt.logging.debug(f"🧱 Layers l={layer_count} seed={seed}: grad ratio {grad_ratio:.4f}, "
                     f"Y-norm ratio {ratio:.4f}, CG {report.iterations} iterations")

    return LayeredResult(
        layer_count=layer_count,
        seed=seed,
        grad_ratio=grad_ratio,
        y_norm_ratio=ratio,
        coefficient_y_norm=coefficient_norm,
        max_layer_seminorm=seminorm,
        background_y_norm=background_norm,
        cg_iterations=report.iterations,
    )
