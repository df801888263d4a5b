import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.sparse import csr_matrix, diags

from cli.property_validator import REFINEMENT_RATIO_RANGE, slab_error, slab_system
from core.errors import NonConvergenceError, NotPositiveDefiniteError
from core.protocol import PreconditionerKind
from discretize.assembly import LinearSystem, assemble
from discretize.boundary import BoundaryData
from discretize.grid import box_grid, build_graded_grid
from geometry.gap import GapGeometry
from solve.cg import RESIDUAL_GROWTH_MAX, SolveReport, cg_solve, lanczos_min_ritz, precondition
from transform.coefficients import CoefficientField, pushforward_coefficients
from transform.maps import FlattenMap


def diagonal_system(diagonal, rhs=None):
    # 2 x 3 nodes: one vertical line of three per lateral node
    grid = box_grid(2, 1.0, 0.5, 1, 2)
    diagonal = np.asarray(diagonal, dtype=float)
    assert diagonal.size == grid.size
    rhs = np.ones(grid.size) if rhs is None else np.asarray(rhs, dtype=float)
    return LinearSystem(matrix=csr_matrix(diags(diagonal)), rhs=rhs,
                        dirichlet_mask=np.zeros(grid.size, dtype=bool),
                        dirichlet_values=np.zeros(grid.size), grid=grid)


def graded_system(epsilon=1e-3, cells=64, vertical_cells=16):
    geom = GapGeometry.balls(1.0, epsilon, 0.5, 1.0, 2)
    fmap = FlattenMap.global_map(geom)
    grid = build_graded_grid(geom, geom.R0, cells, vertical_cells=vertical_cells)
    a = CoefficientField.identity(2)
    return assemble(lambda z: pushforward_coefficients(a, fmap, z), grid, BoundaryData.coordinate(2), fmap, workers=1)


class TestConjugateGradients:

    def test_distinct_eigenvalues_terminate(self):
        system = diagonal_system(np.arange(1.0, 7.0))
        u, report = cg_solve(system, tol=1e-10, preconditioner=PreconditionerKind.NONE)
        assert report.iterations <= 6
        assert np.allclose(u.flat(), 1.0 / np.arange(1.0, 7.0))

    def test_zero_rhs(self):
        system = diagonal_system(np.arange(1.0, 7.0), rhs=np.zeros(6))
        u, report = cg_solve(system)
        assert report.iterations == 0
        assert np.all(u.values == 0.0)

    def test_jacobi_fixes_bad_scaling(self):
        system = diagonal_system([1.0, 1e6, 1.0, 1e6, 1.0, 1e6])
        _, report = cg_solve(system, tol=1e-12, preconditioner=PreconditionerKind.JACOBI)
        assert report.iterations <= 3
        assert report.preconditioner == 'jacobi'

    def test_line_preconditioner_is_exact_on_diagonal(self):
        system = diagonal_system(np.arange(1.0, 7.0))
        _, report = cg_solve(system, tol=1e-12, preconditioner=PreconditionerKind.LINE)
        assert report.iterations == 1

    def test_indefinite_matrix(self):
        system = diagonal_system(-np.arange(1.0, 7.0))
        with pytest.raises(NotPositiveDefiniteError):
            cg_solve(system, preconditioner=PreconditionerKind.NONE)

    def test_non_convergence_keeps_history(self):
        system = graded_system()
        with pytest.raises(NonConvergenceError) as info:
            cg_solve(system, tol=1e-12, max_iter=3, preconditioner=PreconditionerKind.NONE)
        assert len(info.value.residual_history) == 4
        assert info.value.best_iterate.shape == (system.size,)

    def test_residual_meets_tolerance(self):
        system = graded_system()
        u, report = cg_solve(system, tol=1e-10)
        residual = np.linalg.norm(system.matrix @ u.flat() - system.rhs) / np.linalg.norm(system.rhs)
        assert residual <= 1e-10
        assert report.final_relative_residual == pytest.approx(residual, rel=1e-6)

    def test_bitwise_reproducible(self):
        system = graded_system()
        first, _ = cg_solve(system, tol=1e-10)
        second, _ = cg_solve(system, tol=1e-10)
        assert np.array_equal(first.values, second.values)

    def test_line_beats_unpreconditioned(self):
        system = graded_system()
        _, plain = cg_solve(system, tol=1e-8, preconditioner=PreconditionerKind.NONE)
        _, line = cg_solve(system, tol=1e-8, preconditioner=PreconditionerKind.LINE)
        assert line.iterations < plain.iterations

    def test_rejects_nonpositive_tolerance(self):
        with pytest.raises(ValueError):
            cg_solve(diagonal_system(np.ones(6)), tol=0.0)

    def test_scaled_system_has_same_solution(self):
        system = slab_system(32)
        scaled = replace(system, matrix=7.0 * system.matrix, rhs=7.0 * system.rhs)
        u, _ = cg_solve(system, tol=1e-12)
        v, report = cg_solve(scaled, tol=1e-12)
        assert report.final_relative_residual <= 1e-12
        assert np.max(np.abs(v.values - u.values)) <= 1e-12 * np.max(np.abs(u.values))

    @pytest.mark.parametrize("kind", [PreconditionerKind.NONE, PreconditionerKind.LINE])
    def test_residual_growth_is_bounded(self, kind):
        _, report = cg_solve(slab_system(32), tol=1e-10, preconditioner=kind)
        assert report.residual_history[-1] <= 1e-10
        assert report.transient_growth() <= RESIDUAL_GROWTH_MAX

    def test_transient_growth(self):
        report = SolveReport(3, 0.1, 0.0, 'none', [1.0, 0.5, 2.0, 0.1])
        assert report.transient_growth(stride=2) == pytest.approx(2.0)
        assert report.transient_growth(stride=4) == 0.0


class TestSpectrum:

    def test_lanczos_positive_on_assembled_system(self):
        assert lanczos_min_ritz(graded_system(cells=32, vertical_cells=8)) > 0

    def test_lanczos_detects_negative_eigenvalue(self):
        system = diagonal_system([1.0, 2.0, 3.0, -1.0, 4.0, 5.0])
        assert lanczos_min_ritz(system) < 0

    def test_precondition_falls_back_to_jacobi(self):
        system = diagonal_system([1.0, -2.0, 3.0, 4.0, 5.0, 6.0])
        assert precondition(system, PreconditionerKind.LINE).kind == PreconditionerKind.JACOBI


class TestRefinement:

    def test_slab_error_is_second_order(self):
        errors = [slab_error(cells, 1e-12)[0] for cells in (16, 32, 64, 128)]
        ratios = [a / b for a, b in zip(errors[:-1], errors[1:])]
        low, high = REFINEMENT_RATIO_RANGE
        assert all(low <= q <= high for q in ratios), ratios

    def test_slab_error_is_small(self):
        error, iterations = slab_error(32, 1e-12)
        assert error < 1e-2 * math.cosh(math.pi)
        assert iterations > 0
