"""
Vertex-centred finite-volume assembly of -d_i(b^{ij} d_j w) = 0.

Fluxes along each axis use face coefficients averaged from the two adjacent
nodes. Mixed terms b^{kl} are discretized cell by cell in the (k, l) plane
through the two diagonal differences of the cell, which keeps the matrix
exactly symmetric. Top and bottom faces carry no flux term, so the zero
conormal condition holds without boundary rows.

Every matrix row is gathered from precomputed face and cell weights in a
fixed order, so splitting rows over threads cannot change a single bit.
"""

import itertools
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import bittensor as bt
import numpy as np
from scipy.sparse import csr_matrix

from config.config import appConfig as config
from core.errors import AssemblyError, DomainError
from core.protocol import DirichletFaces
from discretize.boundary import BoundaryData, dirichlet_mask, dirichlet_trace
from discretize.grid import TensorGrid
from transform.maps import FlattenMap

ARITHMETIC = 'arithmetic'
HARMONIC = 'harmonic'


@dataclass(frozen=True)
class LinearSystem:
    matrix: csr_matrix
    rhs: np.ndarray
    dirichlet_mask: np.ndarray
    dirichlet_values: np.ndarray
    grid: TensorGrid

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def symmetry_defect(self) -> float:
        """max |A_ij - A_ji| relative to max |A|."""
        difference = abs(self.matrix - self.matrix.T)
        scale = abs(self.matrix).max()
        return float(difference.max() / scale) if scale > 0 else 0.0


def stencil_offsets(n: int) -> List[Tuple[int, ...]]:
    """Neighbour offsets reachable by axis fluxes and planar mixed terms, in increasing column order."""
    return [o for o in itertools.product((-1, 0, 1), repeat=n) if sum(map(abs, o)) <= 2]


def _plane_blocks(planes: int, workers: int) -> List[Tuple[int, int]]:
    count = max(1, min(workers, planes))
    edges = np.linspace(0, planes, count + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _run_blocks(function, planes: int, workers: int) -> list:
    blocks = _plane_blocks(planes, workers)
    if len(blocks) == 1:
        return [function(*blocks[0])]

    with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
        # results come back in block order whatever the completion order
        return list(pool.map(lambda block: function(*block), blocks))


def node_coefficients(b: Callable[[np.ndarray], np.ndarray], grid: TensorGrid,
                      workers: Optional[int] = None) -> np.ndarray:
    """b evaluated at every node, shape (*grid.shape, n, n)."""
    workers = config.worker_count() if workers is None else workers
    nodes = grid.nodes()

    parts = _run_blocks(lambda a, c: np.asarray(b(nodes[a:c]), dtype=float), grid.shape[0], workers)
    return np.concatenate(parts, axis=0)


def check_node_coefficients(B: np.ndarray, grid: TensorGrid):
    """Abort when b is not symmetric positive definite at some node."""
    if not np.array_equal(B, np.swapaxes(B, -1, -2)):
        raise AssemblyError("coefficient matrix is not symmetric")

    smallest = np.linalg.eigvalsh(B)[..., 0]
    if not np.all(np.isfinite(smallest)):
        index = np.unravel_index(int(np.argmax(~np.isfinite(smallest))), smallest.shape)
        raise AssemblyError(f"non-finite coefficient at node {index}", location=grid.nodes()[index])

    worst = np.unravel_index(int(np.argmin(smallest)), smallest.shape)
    if smallest[worst] <= 0:
        location = grid.nodes()[worst]
        raise AssemblyError(f"coefficient not positive definite at z = {location}: "
                            f"smallest eigenvalue {smallest[worst]:.3e}", location=location)


def _broadcast_axis(values: np.ndarray, k: int, n: int) -> np.ndarray:
    shape = [1] * n
    shape[k] = -1
    return values.reshape(shape)


def face_weights(B: np.ndarray, grid: TensorGrid, vertical_average: str = ARITHMETIC) -> List[np.ndarray]:
    """T_k(p): flux weight of the edge p -> p + e_k, zero on the last plane of axis k."""
    n = grid.n
    widths = [grid.control_widths(k) for k in range(n)]
    weights = []
    for k in range(n):
        lo = [slice(None)] * n
        hi = [slice(None)] * n
        lo[k] = slice(0, -1)
        hi[k] = slice(1, None)

        left = B[tuple(lo)][..., k, k]
        right = B[tuple(hi)][..., k, k]
        if k == n - 1 and vertical_average == HARMONIC:
            face = 2.0 * left * right / (left + right)
        else:
            face = 0.5 * (left + right)

        area = np.ones(1)
        for j in range(n):
            if j != k:
                area = area * _broadcast_axis(widths[j], j, n)

        h = _broadcast_axis(np.diff(grid.axes[k]), k, n)
        T = np.zeros(grid.shape)
        T[tuple(lo)] = face * area / h
        weights.append(T)

    return weights


def cell_weights(B: np.ndarray, grid: TensorGrid) -> dict:
    """G_kl(q) = mean(b^{kl} over the four cell corners) * W / 4 for the (k, l) cell with lower corner q."""
    n = grid.n
    widths = [grid.control_widths(k) for k in range(n)]
    weights = {}
    for k, l in itertools.combinations(range(n), 2):
        corner = {}
        for dk, dl in itertools.product((0, 1), repeat=2):
            index = [slice(None)] * n
            index[k] = slice(dk, grid.shape[k] - 1 + dk)
            index[l] = slice(dl, grid.shape[l] - 1 + dl)
            corner[(dk, dl)] = B[tuple(index)][..., k, l]

        mean = (((corner[(0, 0)] + corner[(1, 0)]) + corner[(0, 1)]) + corner[(1, 1)]) / 4.0

        W = np.ones([1] * n)
        for j in range(n):
            if j not in (k, l):
                W = W * _broadcast_axis(widths[j], j, n)

        lower = [slice(None)] * n
        lower[k] = slice(0, -1)
        lower[l] = slice(0, -1)
        G = np.zeros(grid.shape)
        G[tuple(lower)] = mean * W / 4.0
        weights[(k, l)] = G

    return weights


class _Shifter:
    """Reads A(p + o) for row planes [a, b) of axis 0, zero outside the grid."""

    def __init__(self, arrays: dict, shape: Tuple[int, ...]):
        self.padded = {key: np.pad(array, 1) for key, array in arrays.items()}
        self.shape = shape

    def __call__(self, key, offset: Tuple[int, ...], a: int, b: int) -> np.ndarray:
        index = [slice(a + 1 + offset[0], b + 1 + offset[0])]
        for j in range(1, len(self.shape)):
            index.append(slice(1 + offset[j], 1 + offset[j] + self.shape[j]))

        return self.padded[key][tuple(index)]


def _unit(n: int, *axes_signs) -> Tuple[int, ...]:
    offset = [0] * n
    for axis, sign in axes_signs:
        offset[axis] += sign

    return tuple(offset)


def _stencil_rows(shift: _Shifter, n: int, offsets: List[Tuple[int, ...]], a: int, b: int) -> np.ndarray:
    """Stencil values of rows in planes [a, b), shape (rows, len(offsets))."""
    position = {o: i for i, o in enumerate(offsets)}
    zero = tuple([0] * n)
    block_shape = (b - a,) + shift.shape[1:]
    values = np.zeros(block_shape + (len(offsets),))

    centre = np.zeros(block_shape)
    for k in range(n):
        here = shift(('T', k), zero, a, b)
        behind = shift(('T', k), _unit(n, (k, -1)), a, b)
        centre = centre + here + behind
        values[..., position[_unit(n, (k, 1))]] -= here
        values[..., position[_unit(n, (k, -1))]] -= behind

    for k, l in itertools.combinations(range(n), 2):
        key = ('G', k, l)
        g00 = shift(key, zero, a, b)
        g11 = shift(key, _unit(n, (k, -1), (l, -1)), a, b)
        g10 = shift(key, _unit(n, (k, -1)), a, b)
        g01 = shift(key, _unit(n, (l, -1)), a, b)

        centre = centre + 2.0 * (((g00 + g11) - g10) - g01)
        values[..., position[_unit(n, (k, 1), (l, 1))]] -= 2.0 * g00
        values[..., position[_unit(n, (k, -1), (l, -1))]] -= 2.0 * g11
        values[..., position[_unit(n, (k, -1), (l, 1))]] += 2.0 * g10
        values[..., position[_unit(n, (k, 1), (l, -1))]] += 2.0 * g01

    values[..., position[zero]] = centre
    return values.reshape(-1, len(offsets))


def stencil_values(B: np.ndarray, grid: TensorGrid, vertical_average: str = ARITHMETIC,
                   workers: Optional[int] = None) -> Tuple[np.ndarray, List[Tuple[int, ...]]]:
    """Per-row stencil of the pure Neumann operator, rows in flat node order."""
    workers = config.worker_count() if workers is None else workers
    n = grid.n
    offsets = stencil_offsets(n)

    arrays = {('T', k): T for k, T in enumerate(face_weights(B, grid, vertical_average))}
    arrays.update({('G',) + pair: G for pair, G in cell_weights(B, grid).items()})
    shift = _Shifter(arrays, grid.shape)

    parts = _run_blocks(lambda a, b: _stencil_rows(shift, n, offsets, a, b), grid.shape[0], workers)
    return np.concatenate(parts, axis=0), offsets


def _neighbour_index(grid: TensorGrid, offsets: List[Tuple[int, ...]]) -> Tuple[np.ndarray, np.ndarray]:
    """Flat column index of every (row, offset) pair and whether it lies in the grid."""
    index = [axis_index.reshape(-1) for axis_index in np.indices(grid.shape)]
    strides = [int(np.prod(grid.shape[j + 1:])) for j in range(grid.n)]
    rows = np.arange(grid.size)

    columns = np.empty((grid.size, len(offsets)), dtype=np.int64)
    valid = np.ones((grid.size, len(offsets)), dtype=bool)
    for i, offset in enumerate(offsets):
        columns[:, i] = rows + sum(o * s for o, s in zip(offset, strides))
        for j, o in enumerate(offset):
            if o:
                valid[:, i] &= (index[j] + o >= 0) & (index[j] + o < grid.shape[j])

    # out-of-grid slots point at the row itself and are masked by `valid`
    columns = np.where(valid, columns, rows[:, None])
    return columns, valid


def _to_csr(values: np.ndarray, columns: np.ndarray, valid: np.ndarray) -> csr_matrix:
    keep = valid & (values != 0.0)
    indptr = np.concatenate([[0], np.cumsum(keep.sum(axis=1))])
    size = values.shape[0]
    return csr_matrix((values[keep], columns[keep], indptr), shape=(size, size))


def assemble_stiffness(B: np.ndarray, grid: TensorGrid, vertical_average: str = ARITHMETIC,
                       workers: Optional[int] = None) -> csr_matrix:
    """Pure Neumann operator without any Dirichlet rows."""
    values, offsets = stencil_values(B, grid, vertical_average, workers)
    columns, valid = _neighbour_index(grid, offsets)
    return _to_csr(values, columns, valid)


def assemble_from_coefficients(B: np.ndarray, grid: TensorGrid, boundary_values: np.ndarray,
                               faces: DirichletFaces = DirichletFaces.LATERAL,
                               vertical_average: str = ARITHMETIC, workers: Optional[int] = None,
                               check_spd: bool = True) -> LinearSystem:
    """
    A = P K P + D and rhs = D g - P K g with D the Dirichlet mask and P = I - D.

    boundary_values holds g on Dirichlet nodes; other entries are ignored.
    """
    if check_spd:
        check_node_coefficients(B, grid)

    mask = dirichlet_mask(grid, faces).reshape(-1)
    if np.all(mask):
        raise DomainError("grid has no interior nodes")

    g = np.where(mask, np.asarray(boundary_values, dtype=float).reshape(-1), 0.0)

    values, offsets = stencil_values(B, grid, vertical_average, workers)
    columns, valid = _neighbour_index(grid, offsets)

    neighbour_dirichlet = valid & mask[columns]
    rhs = np.zeros(grid.size)
    for j in range(len(offsets)):
        hit = neighbour_dirichlet[:, j]
        rhs[hit] -= values[hit, j] * g[columns[hit, j]]

    values = np.where(neighbour_dirichlet, 0.0, values)
    centre = offsets.index(tuple([0] * grid.n))
    values[mask] = 0.0
    values[mask, centre] = 1.0
    rhs[mask] = g[mask]

    matrix = _to_csr(values, columns, valid)
    return LinearSystem(matrix=matrix, rhs=rhs, dirichlet_mask=mask, dirichlet_values=g, grid=grid)


def assemble(b: Callable[[np.ndarray], np.ndarray], grid: TensorGrid, bc: BoundaryData,
             fmap: Optional[FlattenMap], faces: DirichletFaces = DirichletFaces.LATERAL,
             vertical_average: str = ARITHMETIC, workers: Optional[int] = None) -> LinearSystem:
    """Evaluate b on the nodes, check it, and build the Dirichlet-reduced system."""
    start = time.time()
    workers = config.worker_count() if workers is None else workers

    B = node_coefficients(b, grid, workers)
    boundary = dirichlet_trace(bc, fmap, grid, faces)
    system = assemble_from_coefficients(B, grid, boundary, faces, vertical_average, workers)

    bt.logging.debug(f"🔧 Assembled {system.size} unknowns, {system.matrix.nnz} nonzeros "
                     f"with {workers} worker(s) in {time.time() - start:.2f}s")
    return system


def write_debug_dump(system: LinearSystem, directory: str, tag: str = "system") -> str:
    """Plain-text header plus little-endian binary arrays for the grid axes and CSR data."""
    os.makedirs(directory, exist_ok=True)
    header_path = os.path.join(directory, f"{tag}.txt")

    arrays = {f"axis{k}": axis.astype('<f8') for k, axis in enumerate(system.grid.axes)}
    arrays.update({
        'indptr': system.matrix.indptr.astype('<i8'),
        'indices': system.matrix.indices.astype('<i8'),
        'data': system.matrix.data.astype('<f8'),
        'rhs': system.rhs.astype('<f8'),
    })

    with open(header_path, 'w') as header:
        header.write(f"# {tag}: {system.size} unknowns, {system.matrix.nnz} nonzeros\n")
        header.write(f"grid_shape = {','.join(str(m) for m in system.grid.shape)}\n")
        for name, array in arrays.items():
            filename = f"{tag}.{name}.bin"
            array.tofile(os.path.join(directory, filename))
            header.write(f"{name} = {filename} dtype={array.dtype.str} count={array.size}\n")

    bt.logging.debug(f"💾 Debug dump written to {header_path}")
    return header_path
