import math
import time
from typing import Callable, Dict, List, Optional, Tuple

import bittensor as bt
import numpy as np

from cli.scenario import Scenario
from config.config import appConfig as config
from core.errors import GapfieldError, NonConvergenceError
from core.protocol import DirichletFaces, PreconditionerKind, PropertyResult
from discretize.assembly import LinearSystem, assemble, assemble_stiffness, node_coefficients
from discretize.boundary import BoundaryData
from discretize.grid import DiscreteField, box_grid, build_graded_grid
from geometry.gap import GapGeometry, delta_scale, gap_profile_values
from solve.cg import cg_solve, lanczos_min_ritz
from transform.coefficients import (
    CoefficientField,
    flattened_box_samples,
    holder_quotient,
    pushforward_coefficients,
    reflect_extend,
    reflect_point,
)
from transform.maps import FlattenMap, forward, inverse, jacobian, jacobian_determinant

SLAB_DELTA = 0.5
REFINEMENT_LEVELS = 4
REFINEMENT_RATIO_RANGE = (3.5, 4.5)
ROUND_TRIP_TOL = 1e-12
JACOBIAN_TOL = 1e-6
PUSHFORWARD_TOL = 1e-5
REFLECTION_TOL = 1e-12
SYMMETRY_TOL = 1e-13
NEUMANN_TOL = 1e-12
OFFDIAG_SPREAD = 2.0
ANNULUS_NN_SPREAD = 25.0
PRECONDITIONER_GAIN = 2.0
MAX_PRINCIPLE_TOL = 1e-8


def standard_geometry(epsilon: float = 0.01, n: int = 3) -> GapGeometry:
    return GapGeometry.balls(1.0, epsilon, 0.5, 1.0, n)


def standard_maps(geom: Optional[GapGeometry] = None) -> Dict[str, FlattenMap]:
    geom = standard_geometry() if geom is None else geom
    return {
        'global': FlattenMap.global_map(geom),
        'local': FlattenMap.local(geom, (0.02, 0.0)),
        'annulus': FlattenMap.annulus(geom, (0.01, 0.0), 0.1),
    }


def interior_samples(fmap: FlattenMap, count: int, seed: int = 0, shrink: float = 0.9) -> np.ndarray:
    """Flattened-box samples pulled away from every face."""
    return shrink * flattened_box_samples(fmap, count, seed)


def fd_jacobian(fmap: FlattenMap, x: np.ndarray, step: float) -> np.ndarray:
    """Central differences of forward, one column per physical coordinate."""
    n = fmap.n
    J = np.empty(x.shape[:-1] + (n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        J[..., :, j] = (forward(fmap, x + e) - forward(fmap, x - e)) / (2.0 * step)
    return J


def slab_solution(z: np.ndarray, delta: float = SLAB_DELTA) -> np.ndarray:
    """cosh(k z1) cos(k (z_n + delta)) with k = pi / (2 delta): harmonic, zero flux on z_n = +-delta."""
    k = math.pi / (2.0 * delta)
    return np.cosh(k * z[..., 0]) * np.cos(k * (z[..., -1] + delta))


def slab_system(cells: int, workers: int = 1) -> LinearSystem:
    """Identity-coefficient system on [-1, 1] x [-delta, delta] with the slab solution on the lateral faces."""
    grid = box_grid(2, 1.0, SLAB_DELTA, cells, cells // 2)
    bc = BoundaryData.custom(2, slab_solution)
    return assemble(CoefficientField.identity(2), grid, bc, None, faces=DirichletFaces.LATERAL, workers=workers)


def slab_error(cells: int, tol: float, workers: int = 1) -> Tuple[float, int]:
    """L-infinity nodal error of the manufactured slab solve."""
    system = slab_system(cells, workers)
    u, report = cg_solve(system, tol=tol)
    exact = DiscreteField.from_function(system.grid, slab_solution)
    return float(np.max(np.abs(u.values - exact.values))), report.iterations


class PropertyValidator:
    """Property suites for the transform, discretize and solve layers."""

    def __init__(self, scenario: Optional[Scenario] = None, flip_mixed_sign: bool = False, workers: int = 1):
        self.scenario = scenario
        self.flip_mixed_sign = flip_mixed_sign
        self.workers = workers
        self.tol = scenario.numerics.tol if scenario is not None else config.DEFAULT_TOL
        self.results: List[PropertyResult] = []

        self.validation_stats = {
            'total_checks': 0,
            'failures': 0,
            'errors': 0,
            'total_time': 0.0,
        }

    def _run(self, module: str, name: str, check: Callable[[], Tuple[bool, float, float, dict]]) -> PropertyResult:
        start = time.time()
        self.validation_stats['total_checks'] += 1
        try:
            passed, measured, threshold, details = check()
            result = PropertyResult(module, name, bool(passed), float(measured), float(threshold), details=details)
        except (GapfieldError, ValueError, np.linalg.LinAlgError) as e:
            self.validation_stats['errors'] += 1
            bt.logging.error(f"💥 {module}.{name} raised: {e}")
            result = PropertyResult(module, name, False, float('nan'), float('nan'), error_message=str(e))

        elapsed = time.time() - start
        self.validation_stats['total_time'] += elapsed

        if result.passed:
            bt.logging.success(f"✅ {module}.{name}: measured {result.measured:.4g} (threshold {result.threshold:.4g}, {elapsed:.2f}s)")
        else:
            self.validation_stats['failures'] += 1
            bt.logging.warning(f"⚠️ {module}.{name} failed: measured {result.measured:.4g}, threshold {result.threshold:.4g} "
                               f"{result.error_message}")

        self.results.append(result)
        return result

    # solve

    def check_refinement_order(self) -> PropertyResult:
        def check():
            base = config.REFINEMENT_BASE_CELLS
            errors = [slab_error(base * 2 ** level, self.tol, self.workers)[0] for level in range(REFINEMENT_LEVELS)]
            ratios = [a / b if b > 0 else math.inf for a, b in zip(errors[:-1], errors[1:])]
            low, high = REFINEMENT_RATIO_RANGE
            worst = max(ratios, key=lambda q: abs(q - 4.0))
            passed = all(low <= q <= high for q in ratios)
            return passed, worst, low if worst < 4.0 else high, {'errors': errors, 'ratios': ratios}

        return self._run('solve', 'refinement_order', check)

    def check_preconditioner_gain(self) -> PropertyResult:
        def check():
            geom = standard_geometry(1e-3, 2)
            fmap = FlattenMap.global_map(geom)
            grid = build_graded_grid(geom, geom.R0, 64, vertical_cells=16)
            a = CoefficientField.identity(2)
            system = assemble(lambda z: pushforward_coefficients(a, fmap, z), grid, BoundaryData.coordinate(2),
                              fmap, workers=self.workers)

            iterations = {}
            for kind in PreconditionerKind:
                try:
                    _, report = cg_solve(system, tol=1e-8, preconditioner=kind)
                    iterations[kind.value] = report.iterations
                except NonConvergenceError as e:
                    iterations[kind.value] = len(e.residual_history) - 1

            bt.logging.info(f"📊 CG iterations at eps = 1e-3: {iterations}")
            best = min(iterations['jacobi'], iterations['line'])
            gain = iterations['none'] / max(best, 1)
            return gain >= PRECONDITIONER_GAIN, gain, PRECONDITIONER_GAIN, {'iterations': iterations}

        return self._run('solve', 'preconditioner_gain', check)

    # transform

    def check_round_trip(self) -> PropertyResult:
        def check():
            worst = 0.0
            for kind, fmap in standard_maps().items():
                z = flattened_box_samples(fmap, config.ROUND_TRIP_SAMPLES, seed=1)
                back = forward(fmap, inverse(fmap, z))
                scale = np.maximum(np.linalg.norm(z, axis=-1), fmap.half_height)
                worst = max(worst, float(np.max(np.linalg.norm(back - z, axis=-1) / scale)))
            return worst <= ROUND_TRIP_TOL, worst, ROUND_TRIP_TOL, {}

        return self._run('transform', 'round_trip', check)

    def check_jacobian_fd(self) -> PropertyResult:
        def check():
            worst, per_map = 0.0, {}
            for kind, fmap in standard_maps().items():
                x = inverse(fmap, interior_samples(fmap, config.JACOBIAN_FD_SAMPLES, seed=2))
                step = 1e-5 * math.sqrt(fmap.geometry.epsilon + float(np.dot(fmap.x0p, fmap.x0p)))
                J = jacobian(fmap, x)
                error = np.abs(fd_jacobian(fmap, x, step) - J).max(axis=(-2, -1)) / np.abs(J).max(axis=(-2, -1))
                per_map[kind] = float(error.max())
                worst = max(worst, per_map[kind])
            return worst <= JACOBIAN_TOL, worst, JACOBIAN_TOL, per_map

        return self._run('transform', 'jacobian_fd', check)

    def check_pushforward(self) -> PropertyResult:
        """b from the closed-form Jacobian against b rebuilt from finite differences of forward."""
        def check():
            a = CoefficientField.smooth(3, 0.2, (math.pi, 0.0, math.pi))
            worst = 0.0
            for kind, fmap in standard_maps().items():
                z = interior_samples(fmap, config.JACOBIAN_FD_SAMPLES, seed=3)
                x = inverse(fmap, z)
                step = 1e-5 * math.sqrt(fmap.geometry.epsilon + float(np.dot(fmap.x0p, fmap.x0p)))
                Jr = fmap.reference_scale * fd_jacobian(fmap, x, step)
                reference = np.einsum('...ij,...jk,...lk->...il', Jr, a(x), Jr) / np.linalg.det(Jr)[..., None, None]
                b = pushforward_coefficients(a, fmap, z, flip_mixed_sign=self.flip_mixed_sign)
                worst = max(worst, float(np.abs(b - reference).max() / np.abs(reference).max()))
            return worst <= PUSHFORWARD_TOL, worst, PUSHFORWARD_TOL, {'flip_mixed_sign': self.flip_mixed_sign}

        return self._run('transform', 'pushforward_fd', check)

    def check_orientation(self) -> PropertyResult:
        def check():
            a = CoefficientField.identity(3)
            smallest_det, smallest_eig, symmetric = math.inf, math.inf, True
            for fmap in standard_maps().values():
                z = flattened_box_samples(fmap, config.ROUND_TRIP_SAMPLES, seed=4)
                smallest_det = min(smallest_det, float(jacobian_determinant(fmap, inverse(fmap, z)).min()))
                b = pushforward_coefficients(a, fmap, z)
                symmetric &= bool(np.array_equal(b, np.swapaxes(b, -1, -2)))
                smallest_eig = min(smallest_eig, float(np.linalg.eigvalsh(b)[..., 0].min()))
            passed = smallest_det > 0 and smallest_eig > 0 and symmetric
            return passed, min(smallest_det, smallest_eig), 0.0, {'symmetric': symmetric}

        return self._run('transform', 'orientation_and_spd', check)

    def check_reflection(self) -> PropertyResult:
        def check():
            fmap = standard_maps()['local']
            delta = fmap.half_height
            a = CoefficientField.smooth(3, 0.2, (math.pi, 0.0, math.pi))
            rng = np.random.default_rng(5)

            z = interior_samples(fmap, 500, seed=5, shrink=1.0)
            z[:, -1] = rng.uniform(-5.0 * delta, 5.0 * delta, size=len(z))

            source = lambda s: pushforward_coefficients(a, fmap, s)
            extended = reflect_extend(source, delta, z)
            matched = source(reflect_point(delta, z)[0])

            eig_extended = np.linalg.eigvalsh(extended)
            eig_matched = np.linalg.eigvalsh(matched)
            error = float(np.abs(eig_extended - eig_matched).max() / np.abs(eig_matched).max())
            return error <= REFLECTION_TOL, error, REFLECTION_TOL, {}

        return self._run('transform', 'reflection_conjugacy', check)

    def check_local_offdiagonal(self) -> PropertyResult:
        """C = max_{i != j} |(delta dz/dx)_ij| / delta over Q_{1,delta}, for |x0'| < delta."""
        def check():
            constants = {}
            for epsilon in (1e-2, 1e-3):
                geom = standard_geometry(epsilon)
                fmap = FlattenMap.local(geom, (0.5 * math.sqrt(epsilon), 0.0))
                delta = fmap.reference_scale
                x = inverse(fmap, flattened_box_samples(fmap, 500, seed=6))
                Jy = delta * jacobian(fmap, x)
                off = Jy - np.einsum('...ii->...i', Jy)[..., None] * np.eye(3)
                constants[epsilon] = float(np.abs(off).max() / delta)

            values = list(constants.values())
            spread = max(values) / min(values)
            return spread <= OFFDIAG_SPREAD, spread, OFFDIAG_SPREAD, {'constants': constants}

        return self._run('transform', 'local_offdiagonal_bound', check)

    def check_annulus_vertical(self) -> PropertyResult:
        """(dz/dx)^{nn} = 2 h_r / gap on r/4 < |y'| < 2r, r = 2 sqrt(eps), x0' = 0.1 sqrt(eps) e1."""
        def check():
            rng = np.random.default_rng(7)
            entries = []
            for epsilon in (1e-3, 1e-4):
                root = math.sqrt(epsilon)
                geom = standard_geometry(epsilon)
                r = 2.0 * root
                fmap = FlattenMap.annulus(geom, (0.1 * root, 0.0), r)

                theta = rng.uniform(0.0, 2.0 * np.pi, 400)
                rho = rng.uniform(0.25 * r, 2.0 * r, 400)
                xp = fmap.x0p + np.stack([rho * np.cos(theta), rho * np.sin(theta)], axis=-1)
                _, g, gap = gap_profile_values(geom, xp)
                x = np.concatenate([xp, (g - 0.5 * epsilon + 0.5 * gap)[:, None]], axis=-1)
                entries.append(jacobian(fmap, x)[:, -1, -1])

            entries = np.concatenate(entries)
            spread = float(entries.max() / entries.min())
            return spread <= ANNULUS_NN_SPREAD, spread, ANNULUS_NN_SPREAD, {}

        return self._run('transform', 'annulus_vertical_scale', check)

    # discretize

    def _small_system(self):
        geom = standard_geometry(1e-2, 2)
        fmap = FlattenMap.global_map(geom)
        grid = build_graded_grid(geom, geom.R0, 32, vertical_cells=8)
        a = CoefficientField.identity(2)
        b = lambda z: pushforward_coefficients(a, fmap, z)
        return assemble(b, grid, BoundaryData.coordinate(2), fmap, workers=self.workers), b

    def check_system(self) -> List[PropertyResult]:
        system, b = self._small_system()

        def symmetry():
            defect = system.symmetry_defect()
            return defect <= SYMMETRY_TOL, defect, SYMMETRY_TOL, {}

        def constants():
            K = assemble_stiffness(node_coefficients(b, system.grid, self.workers), system.grid, workers=self.workers)
            norm = float(abs(K).sum(axis=1).max())
            defect = float(np.abs(K @ np.ones(K.shape[0])).max() / norm)
            return defect <= NEUMANN_TOL, defect, NEUMANN_TOL, {}

        def spd():
            ritz = lanczos_min_ritz(system)
            return ritz > 0, ritz, 0.0, {}

        return [
            self._run('discretize', 'symmetry', symmetry),
            self._run('discretize', 'neumann_constants', constants),
            self._run('discretize', 'lanczos_spd', spd),
        ]

    # scenario-specific

    def _scenario_epsilons(self) -> List[float]:
        scenario = self.scenario
        if scenario.sweep is not None:
            return list(scenario.sweep.epsilons)
        if scenario.harnack is not None:
            return list(scenario.harnack.epsilons)
        return [scenario.solve_epsilon]

    def _local_centres(self, geom: GapGeometry) -> List[np.ndarray]:
        """0' plus the scenario's sweep and harnack centres whose local box stays inside |x'| < R0."""
        scenario = self.scenario
        centres = [np.zeros(scenario.dimension - 1)]
        for section in ('sweep', 'harnack'):
            x0p = scenario.x0(section)
            if any(np.array_equal(x0p, c) for c in centres):
                continue

            reach = float(np.linalg.norm(x0p))
            if reach < geom.R0 and reach + 0.25 * delta_scale(geom, x0p) < geom.R0:
                centres.append(x0p)

        return centres

    def check_coefficient_bounds(self) -> PropertyResult:
        """
        eig(b) within [lambda/f, f Lambda] at every node of a tensor grid on
        Q_{1,delta} of the local map, for every scenario epsilon and local centre.

        The global map's b grows like 1/gap, so the uniform bound is only
        meaningful after the delta-rescaling.
        """
        scenario = self.scenario
        factor = scenario.acceptance.eigen_factor or 10.0
        numerics = scenario.numerics

        def check():
            a = scenario.build_coefficient()
            n = scenario.dimension
            low, high, nodes_checked, centres_checked = math.inf, 0.0, 0, set()
            for epsilon in self._scenario_epsilons():
                geom = scenario.build_geometry(epsilon)
                for x0p in self._local_centres(geom):
                    fmap = FlattenMap.local(geom, x0p)
                    grid = box_grid(n, 1.0, fmap.half_height, min(numerics.lateral_cells, 32), numerics.vertical_cells)
                    nodes = grid.nodes().reshape(-1, n)
                    nodes = nodes[np.linalg.norm(nodes[:, :-1], axis=-1) < 1.0]
                    eigenvalues = np.linalg.eigvalsh(pushforward_coefficients(a, fmap, nodes))
                    low, high = min(low, float(eigenvalues.min())), max(high, float(eigenvalues.max()))
                    nodes_checked += len(nodes)
                    centres_checked.add(tuple(float(c) for c in x0p))

            lam, Lam = scenario.coefficient.lam, scenario.coefficient.Lam
            measured = max(lam / low, high / Lam)
            details = {'min_eig': low, 'max_eig': high, 'nodes': nodes_checked,
                       'centres': sorted(centres_checked)}
            return measured <= factor, measured, factor, details

        return self._run('transform', 'pushforward_eigen_bounds', check)

    def check_holder_stability(self) -> PropertyResult:
        scenario = self.scenario
        spread_max = scenario.acceptance.holder_spread or 2.0

        def check():
            a = scenario.build_coefficient()
            n = scenario.dimension
            quotients = {}
            for epsilon in self._scenario_epsilons():
                fmap = FlattenMap.local(scenario.build_geometry(epsilon), np.zeros(n - 1))
                quotients[epsilon] = holder_quotient(a, fmap)

            values = np.array(list(quotients.values()))
            if not np.all(np.isfinite(values)) or values.min() <= 0:
                return False, math.inf, spread_max, {'quotients': quotients}

            spread = float(values.max() / values.min())
            return spread <= spread_max, spread, spread_max, {'quotients': quotients}

        return self._run('transform', 'holder_stability', check)

    def check_maximum_principle(self) -> PropertyResult:
        """Coarse global solve at the largest scenario epsilon; u stays inside the Dirichlet data range."""
        scenario = self.scenario

        def check():
            geom = scenario.build_geometry(self._scenario_epsilons()[0])
            fmap = FlattenMap.global_map(geom)
            grid = build_graded_grid(geom, geom.R0 / math.sqrt(geom.n - 1), min(scenario.numerics.lateral_cells, 32),
                                     scenario.numerics.c_grade, vertical_cells=8)
            a = scenario.build_coefficient()
            system = assemble(lambda z: pushforward_coefficients(a, fmap, z), grid, scenario.build_boundary(),
                              fmap, workers=self.workers)
            u, _ = cg_solve(system, tol=self.tol, max_iter=scenario.numerics.max_iter,
                            preconditioner=scenario.numerics.preconditioner)
            return maximum_principle_check(u, system)

        return self._run('solve', 'maximum_principle', check)

    def run_all(self) -> List[PropertyResult]:
        bt.logging.info("🚀 Running property suites")
        self.check_refinement_order()
        self.check_round_trip()
        self.check_jacobian_fd()
        self.check_pushforward()
        self.check_orientation()
        self.check_reflection()
        self.check_local_offdiagonal()
        self.check_annulus_vertical()
        self.check_system()
        self.check_preconditioner_gain()

        if self.scenario is not None and self.scenario.geometry is not None:
            self.check_coefficient_bounds()
            self.check_holder_stability()
            self.check_maximum_principle()

        stats = self.validation_stats
        bt.logging.info(f"📊 {stats['total_checks']} checks, {stats['failures']} failed, "
                        f"{stats['errors']} raised, {stats['total_time']:.1f}s")
        return self.results


def maximum_principle_check(u: DiscreteField, system) -> Tuple[bool, float, float, dict]:
    """Overshoot of u beyond [m, M], the Dirichlet data range, relative to M - m."""
    data = system.dirichlet_values[system.dirichlet_mask]
    low, high = float(data.min()), float(data.max())
    span = high - low
    overshoot = max(low - float(u.values.min()), float(u.values.max()) - high, 0.0)
    relative = overshoot / span if span > 0 else overshoot
    return relative <= MAX_PRINCIPLE_TOL, relative, MAX_PRINCIPLE_TOL, {'data_range': [low, high]}
