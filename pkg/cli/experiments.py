"""
Experiment orchestration: one runner per scenario, one method per subcommand.

Numerical layers raise; this module catches per-epsilon failures, records the
skip and carries on with the remaining epsilons.
"""

import math
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import bittensor as bt
import numpy as np

from analysis.fitting import MIN_FIT_POINTS
from analysis.gradient import gradient_pullback, max_grad_global, segment_max_gradient
from analysis.harnack import (
    DyadicRadii,
    HarnackRow,
    dyadic_radii,
    harnack_profile,
    osc_decay_fit,
    sigma_from_harnack,
)
from analysis.layers import LayeredResult, layered_gradient_experiment
from analysis.records import FIT_COLUMNS, SWEEP_COLUMNS, SweepRecord, SweepRow, format_float
from cli.output import (
    HARNACK_COLUMNS,
    HARNACK_SUMMARY_COLUMNS,
    LAYERS_COLUMNS,
    SOLVE_COLUMNS,
    THEOREM_COLUMNS,
    VALIDATE_COLUMNS,
    ResultWriter,
    timestamp,
)
from cli.property_validator import PropertyValidator, maximum_principle_check
from cli.scenario import Scenario
from config.config import appConfig as config
from core.errors import AcceptanceError, DegenerateDataError, GapfieldError
from core.protocol import PropertyResult
from discretize.assembly import assemble, write_debug_dump
from discretize.grid import build_graded_grid
from geometry.gap import delta_scale, working_radius
from solve.cg import cg_solve
from transform.coefficients import pushforward_coefficients
from transform.maps import FlattenMap

# oscillations below this fraction of sup|u| count as a flat solution
FLAT_OSCILLATION_TOL = 1e-8
DEFAULT_LAYER_RATIO_MAX = 1.5
DEFAULT_SLOPE_TOLERANCE = 0.07


@dataclass
class EpsilonSolution:
    row: SweepRow
    unknowns: int
    nonzeros: int
    final_residual: float
    profile: List[HarnackRow]
    radii: DyadicRadii
    flat: bool
    max_principle_overshoot: float
    map_description: Dict[str, Any]
    scaled_magnitude: np.ndarray = field(repr=False)
    scaled_rho2: np.ndarray = field(repr=False)

    def scaled_max(self, beta: float) -> float:
        """max over Omega_{0,r0} of |grad u| (eps + |x'|^2)^(1/2 - beta) / sup|u|."""
        if self.row.u_sup <= 0 or self.scaled_magnitude.size == 0:
            return 0.0

        weight = (self.row.epsilon + self.scaled_rho2) ** (0.5 - beta)
        return float(np.max(self.scaled_magnitude * weight) / self.row.u_sup)


def layer_ratio_growth(results: Sequence[LayeredResult]) -> Dict[int, float]:
    """Per seed: grad_ratio at the largest layer count over grad_ratio at the smallest."""
    growth = {}
    for seed in sorted({r.seed for r in results}):
        rows = sorted((r for r in results if r.seed == seed), key=lambda r: r.layer_count)
        if len(rows) >= 2 and rows[0].grad_ratio > 0:
            growth[seed] = rows[-1].grad_ratio / rows[0].grad_ratio
    return growth


def y_norm_growth(results: Sequence[LayeredResult]) -> Optional[float]:
    """Relative growth of the seed-averaged Y-norm ratio from l = 8 (or the smallest l) to l = 64 (or the largest)."""
    counts = sorted({r.layer_count for r in results})
    if len(counts) < 2:
        return None

    low = 8 if 8 in counts else counts[0]
    high = 64 if 64 in counts else counts[-1]
    mean = lambda l: float(np.mean([r.y_norm_ratio for r in results if r.layer_count == l]))
    base = mean(low)
    return (mean(high) - base) / base if base > 0 else None


def _layered_from_csv(rows: List[Dict[str, str]]) -> List[LayeredResult]:
    return [
        LayeredResult(layer_count=int(r['l']), seed=int(r['seed']), grad_ratio=float(r['grad_ratio']),
                      y_norm_ratio=float(r['y_norm_ratio']), coefficient_y_norm=math.nan,
                      max_layer_seminorm=math.nan, background_y_norm=math.nan, cg_iterations=0)
        for r in rows
    ]


def _check(name: str, passed: bool, measured: Optional[float], threshold: Any, detail: str = "") -> Dict[str, Any]:
    measured = None if measured is None or not math.isfinite(measured) else float(measured)
    return {'name': name, 'passed': bool(passed), 'measured': measured, 'threshold': threshold, 'detail': detail}


class ExperimentRunner:
    """Runs the subcommands of one scenario and writes their result files."""

    def __init__(self, scenario: Optional[Scenario], out_dir: Optional[str] = None, serial: bool = False,
                 debug_dump: Optional[bool] = None):
        self.scenario = scenario
        self.workers = 1 if serial else config.worker_count()
        self.debug_dump = config.DEBUG_DUMP if debug_dump is None else debug_dump
        self.writer = ResultWriter(out_dir or config.OUTPUT_DIRECTORY)

    @property
    def scenario_id(self) -> str:
        return self.scenario.id if self.scenario is not None else "builtin"

    def _metadata(self, **extra) -> Dict[str, Any]:
        metadata = {'scenario_id': self.scenario_id, 'workers': self.workers}
        if self.scenario is not None:
            metadata['numerics'] = self.scenario.numerics.model_dump(mode='json')
        metadata.update(extra)
        return metadata

    # per-epsilon pipeline

    def solve_epsilon(self, epsilon: float, x0p: np.ndarray, workers: int,
                      epsilons: Optional[Sequence[float]] = None) -> EpsilonSolution:
        """Global flatten, graded grid, assemble, solve, then gradient and oscillation diagnostics."""
        start = time.time()
        scenario = self.scenario
        numerics = scenario.numerics

        geom = scenario.build_geometry(epsilon)
        fmap = FlattenMap.global_map(geom)
        lateral_extent = geom.R0 / math.sqrt(geom.n - 1)
        grid = build_graded_grid(geom, lateral_extent, numerics.lateral_cells, numerics.c_grade,
                                 vertical_cells=numerics.vertical_cells)

        a = scenario.build_coefficient()
        system = assemble(lambda z: pushforward_coefficients(a, fmap, z), grid, scenario.build_boundary(), fmap,
                          workers=workers)
        if self.debug_dump:
            write_debug_dump(system, str(self.writer.path('debug')), tag=f"eps_{epsilon:.6g}")

        u, report = cg_solve(system, tol=numerics.tol, max_iter=numerics.max_iter,
                             preconditioner=numerics.preconditioner)

        bounded, overshoot, _, _ = maximum_principle_check(u, system)
        if not bounded:
            bt.logging.warning(f"⚠️ eps = {epsilon:g}: solution leaves the Dirichlet data range by {overshoot:.3e} (relative)")

        gf = gradient_pullback(u, fmap)
        delta0 = delta_scale(geom, x0p)
        h_min = min(grid.min_spacing(k) for k in range(geom.n - 1))
        radii = dyadic_radii(delta0, numerics.gamma, lateral_extent, float(np.linalg.norm(x0p)), h_min)
        profile = harnack_profile(u, geom, x0p, radii.radii, points=gf.physical_points)

        u_sup = float(np.abs(u.values).max())
        oscillations = [row.oscillation for row in profile]
        flat = max(oscillations, default=0.0) <= FLAT_OSCILLATION_TOL * max(u_sup, 1.0)
        sigma = None
        if flat:
            bt.logging.warning(f"⚠️ eps = {epsilon:g}: oscillation is flat; decay rate undefined")
            for row in profile:
                row.ratio_upper = row.ratio_lower = None
                row.errors.append("flat")
        else:
            try:
                sigma = osc_decay_fit(radii.radii, oscillations).sigma
            except DegenerateDataError as e:
                bt.logging.warning(f"⚠️ eps = {epsilon:g}: no decay rate ({e})")

        ratios = [row.max_ratio for row in profile if row.max_ratio is not None]

        r0 = working_radius(geom, epsilons, numerics.gamma).r0
        mask = grid.interior_mask(2) & (np.linalg.norm(gf.lateral_points, axis=-1) < r0)

        row = SweepRow(
            epsilon=float(epsilon),
            delta0=delta0,
            max_grad_global=max_grad_global(gf),
            max_grad_segment=segment_max_gradient(gf, x0p),
            osc_radii=[row.r for row in profile],
            osc_values=oscillations,
            harnack_max_ratio=max(ratios) if ratios else None,
            cg_iters=report.iterations,
            wall_time_s=time.time() - start,
            grid_shape=grid.describe()['grid_shape'],
            sigma_hat=sigma,
            u_sup=u_sup,
        )

        bt.logging.info(f"📊 eps = {epsilon:g}: max|grad u| {row.max_grad_global:.6g}, segment {row.max_grad_segment:.6g}, "
                        f"CG {report.iterations} iterations, {row.wall_time_s:.1f}s")

        return EpsilonSolution(
            row=row,
            unknowns=system.size,
            nonzeros=int(system.matrix.nnz),
            final_residual=report.final_relative_residual,
            profile=profile,
            radii=radii,
            flat=flat,
            max_principle_overshoot=overshoot,
            map_description=fmap.describe(),
            scaled_magnitude=gf.magnitude[mask],
            scaled_rho2=np.sum(gf.lateral_points[mask] ** 2, axis=-1),
        )

    def _try_solve(self, epsilon: float, x0p: np.ndarray, workers: int,
                   epsilons: Sequence[float]) -> Tuple[float, Optional[EpsilonSolution], str]:
        try:
            return epsilon, self.solve_epsilon(epsilon, x0p, workers, epsilons), ""
        except GapfieldError as e:
            bt.logging.error(f"💥 eps = {epsilon:g} skipped: {type(e).__name__}: {e}")
            bt.logging.debug(traceback.format_exc())
            return epsilon, None, f"{type(e).__name__}: {e}"

    def _solve_many(self, epsilons: Sequence[float], x0p: np.ndarray) -> Tuple[Dict[float, EpsilonSolution], Dict[float, str]]:
        """Concurrent over epsilons when more than one worker is available; results keyed by epsilon."""
        if self.workers > 1 and len(epsilons) > 1:
            with ThreadPoolExecutor(max_workers=min(self.workers, len(epsilons))) as pool:
                outcomes = list(pool.map(lambda e: self._try_solve(e, x0p, 1, epsilons), epsilons))
        else:
            outcomes = [self._try_solve(e, x0p, self.workers, epsilons) for e in epsilons]

        solutions = {e: s for e, s, _ in outcomes if s is not None}
        skipped = {e: reason for e, s, reason in outcomes if s is None}
        return solutions, skipped

    # subcommands

    def run_validate(self, flip_mixed_sign: bool = False) -> List[PropertyResult]:
        validator = PropertyValidator(self.scenario, flip_mixed_sign=flip_mixed_sign, workers=self.workers)
        results = validator.run_all()

        rows = [
            [r.module, r.name, str(r.passed).lower(), format_float(r.measured), format_float(r.threshold), r.error_message]
            for r in results
        ]
        self.writer.write_csv('validate.csv', VALIDATE_COLUMNS, rows,
                              self._metadata(validation_stats=validator.validation_stats,
                                             flip_mixed_sign=flip_mixed_sign))

        failures = [r for r in results if not r.passed]
        if failures:
            summary = ", ".join(f"{r.module}.{r.name} = {r.measured:.4g}" for r in failures)
            raise AcceptanceError(f"{len(failures)} validation properties failed: {summary}", failures=failures)

        bt.logging.success(f"✅ All {len(results)} validation properties passed")
        return results

    def run_solve(self) -> EpsilonSolution:
        scenario = self.scenario
        scenario.require('geometry')
        epsilon = scenario.solve_epsilon
        x0p = scenario.x0('sweep')
        bt.logging.info(f"🚀 Solving {scenario.id} at eps = {epsilon:g}")

        solution = self.solve_epsilon(epsilon, x0p, self.workers, [epsilon])
        row = solution.row
        self.writer.write_csv('solve.csv', SOLVE_COLUMNS, [[
            format_float(row.epsilon), format_float(row.delta0), row.grid_shape, str(solution.unknowns),
            str(solution.nonzeros), str(row.cg_iters), format_float(solution.final_residual),
            format_float(row.max_grad_global), format_float(row.max_grad_segment), format_float(row.u_sup),
            f"{row.wall_time_s:.3f}",
        ]], self._metadata(map=solution.map_description, max_principle_overshoot=solution.max_principle_overshoot))
        return solution

    def run_sweep(self) -> SweepRecord:
        scenario = self.scenario
        sweep = scenario.require('sweep')
        x0p = scenario.x0('sweep')
        epsilons = sweep.epsilons
        bt.logging.info(f"🚀 Sweep {scenario.id}: {len(epsilons)} epsilons, {self.workers} worker(s)")

        solutions, skipped = self._solve_many(epsilons, x0p)
        record = SweepRecord(scenario.id)
        record.merge(s.row for s in solutions.values())
        for epsilon, reason in skipped.items():
            record.skip(epsilon, reason)

        geom = scenario.build_geometry(epsilons[0])
        radius = working_radius(geom, epsilons, scenario.numerics.gamma)
        metadata = self._metadata(
            map=FlattenMap.global_map(geom).describe(),
            working_radius={'r0': radius.r0, 'admissible': radius.admissible, 'delta_limit': radius.delta_limit},
            grid_shapes={format_float(e): s.row.grid_shape for e, s in sorted(solutions.items(), reverse=True)},
            widened_radii={format_float(e): s.radii.widened for e, s in sorted(solutions.items(), reverse=True)},
            max_principle_overshoot={format_float(e): s.max_principle_overshoot for e, s in sorted(solutions.items(), reverse=True)},
            skipped={format_float(e): reason for e, reason in sorted(skipped.items(), reverse=True)},
            fit_target=sweep.fit.value,
        )
        self.writer.write_csv('sweep.csv', SWEEP_COLUMNS, [r.to_csv_row() for r in record.rows], metadata)

        if len(record.rows) < MIN_FIT_POINTS:
            raise DegenerateDataError(f"only {len(record.rows)} of {len(epsilons)} epsilons survived; "
                                      f"a fit needs {MIN_FIT_POINTS}")

        fit = record.fit_exponent(sweep.fit)
        bt.logging.success(f"✅ {scenario.id}: slope {fit.slope:.4f} +- {fit.stderr:.4f}, r^2 {fit.r_squared:.5f}, "
                           f"beta_hat {fit.beta_estimate:.4f}")
        self.writer.write_csv('fit.csv', FIT_COLUMNS, [record.fit_csv_row()], metadata)

        theorem_rows = []
        for row in record.rows:
            row.scaled_max = solutions[row.epsilon].scaled_max(fit.beta_estimate)
            theorem_rows.append([format_float(row.epsilon), format_float(fit.beta_estimate), format_float(row.scaled_max)])
        self.writer.write_csv('theorem.csv', THEOREM_COLUMNS, theorem_rows, metadata)
        return record

    def run_harnack(self) -> Dict[float, EpsilonSolution]:
        scenario = self.scenario
        block = scenario.require('harnack')
        x0p = scenario.x0('harnack')
        if scenario.dimension == 2:
            bt.logging.warning("⚠️ Harnack diagnostics requested for n = 2; the annulus estimate is a 3D statement")

        bt.logging.info(f"🚀 Harnack diagnostics for {scenario.id} at x0' = {x0p}")
        solutions, skipped = self._solve_many(block.epsilons, x0p)
        if not solutions:
            raise GapfieldError(f"every epsilon failed: {skipped}")

        rows, summary = [], []
        for epsilon in sorted(solutions, reverse=True):
            solution = solutions[epsilon]
            for entry in solution.profile:
                status = "; ".join(entry.errors) if entry.errors else "ok"
                rows.append([
                    format_float(epsilon), format_float(solution.row.delta0), format_float(entry.r),
                    format_float(entry.oscillation), format_float(entry.ratio_upper), format_float(entry.ratio_lower),
                    status,
                ])

            ratio = solution.row.harnack_max_ratio
            sigma = solution.row.sigma_hat
            sigma_c1 = sigma_from_harnack(ratio) if ratio is not None else None
            if sigma is None:
                bt.logging.warning(f"⚠️ eps = {epsilon:g}: sigma_hat undefined")
            elif sigma_c1 is not None and math.isfinite(sigma_c1):
                agreement = abs(sigma - sigma_c1) / max(abs(sigma), abs(sigma_c1))
                bt.logging.info(f"📐 eps = {epsilon:g}: sigma_hat {sigma:.4f}, sigma(C1 = {ratio:.3f}) = {sigma_c1:.4f}, "
                                f"relative gap {agreement:.2f}")

            summary.append([
                format_float(epsilon), format_float(solution.row.delta0), format_float(sigma), format_float(ratio),
                format_float(sigma_c1), str(solution.radii.widened).lower(),
            ])

        metadata = self._metadata(
            x0p=[float(v) for v in x0p],
            gamma=scenario.numerics.gamma,
            windows={format_float(e): {'r_min': s.radii.window.r_min, 'r_max': s.radii.window.r_max}
                     for e, s in sorted(solutions.items(), reverse=True)},
            skipped={format_float(e): reason for e, reason in sorted(skipped.items(), reverse=True)},
        )
        self.writer.write_csv('harnack.csv', HARNACK_COLUMNS, rows, metadata)
        self.writer.write_csv('harnack_summary.csv', HARNACK_SUMMARY_COLUMNS, summary, metadata)
        return solutions

    def run_layers(self) -> List[LayeredResult]:
        scenario = self.scenario
        block = scenario.require('layers')
        bc = scenario.boundary.build(block.dimension)
        jobs = [(l, seed) for l in block.counts for seed in block.seeds]
        bt.logging.info(f"🚀 Layered experiment {scenario.id}: {len(jobs)} (l, seed) pairs")

        def run(job, workers):
            l, seed = job
            return layered_gradient_experiment(
                l, seed, n=block.dimension, cells=block.cells, mu=block.mu, amplitude=block.amplitude, bc=bc,
                tol=scenario.numerics.tol, workers=workers, points_per_axis=block.points_per_axis,
            )

        if self.workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=min(self.workers, len(jobs))) as pool:
                results = list(pool.map(lambda job: run(job, 1), jobs))
        else:
            results = [run(job, self.workers) for job in jobs]

        results.sort(key=lambda r: (r.layer_count, r.seed))
        growth = layer_ratio_growth(results)
        y_growth = y_norm_growth(results)
        background = {format_float(r.layer_count): r.background_y_norm for r in results if r.seed == block.seeds[0]}

        rows = [[str(r.layer_count), str(r.seed), format_float(r.grad_ratio), format_float(r.y_norm_ratio)] for r in results]
        self.writer.write_csv('layers.csv', LAYERS_COLUMNS, rows, self._metadata(
            grad_ratio_growth={str(k): v for k, v in growth.items()},
            y_norm_growth=y_growth,
            background_y_norm=background,
            mu=block.mu,
            amplitude=block.amplitude,
        ))

        bound = scenario.acceptance.layer_ratio_max or DEFAULT_LAYER_RATIO_MAX
        worst = max(growth.values(), default=0.0)
        y_text = f"{y_growth:.3f}" if y_growth is not None else "n/a"
        bt.logging.info(f"📊 Layers: worst grad_ratio growth {worst:.3f} (bound {bound}), Y-norm ratio growth {y_text}")
        if worst > bound:
            raise AcceptanceError(f"grad_ratio grows by {worst:.3f} between the smallest and largest layer count, "
                                  f"above {bound}", failures=[growth])
        return results

    def run_fit(self) -> SweepRecord:
        scenario = self.scenario
        sweep = scenario.require('sweep')
        record = SweepRecord(scenario.id)
        record.merge(SweepRow.from_csv_row(r) for r in self.writer.read_csv('sweep.csv'))

        if record.rows:
            smallest = record.rows[-1]
            try:
                smallest.sigma_hat = osc_decay_fit(smallest.osc_radii, smallest.osc_values).sigma
            except DegenerateDataError as e:
                bt.logging.warning(f"⚠️ No decay rate at the smallest epsilon: {e}")

        fit = record.fit_exponent(sweep.fit)
        bt.logging.success(f"✅ {scenario.id}: refit slope {fit.slope:.4f}, r^2 {fit.r_squared:.5f}")
        self.writer.write_csv('fit.csv', FIT_COLUMNS, [record.fit_csv_row()],
                              self._metadata(source='sweep.csv', fit_target=sweep.fit.value))
        return record

    def _fit_checks(self, checks: List[Dict[str, Any]]):
        acceptance = self.scenario.acceptance
        if acceptance.slope_target is None and acceptance.min_slope is None and acceptance.min_r_squared is None:
            return

        if not self.writer.exists('fit.csv'):
            checks.append(_check('fit', False, None, None, "fit.csv missing"))
            return

        fit = self.writer.read_csv('fit.csv')[0]
        slope, r_squared = float(fit['slope']), float(fit['r_squared'])
        if acceptance.slope_target is not None:
            tolerance = acceptance.slope_tolerance or DEFAULT_SLOPE_TOLERANCE
            checks.append(_check('slope_target', abs(slope - acceptance.slope_target) <= tolerance, slope,
                                 f"{acceptance.slope_target} +- {tolerance}"))
        if acceptance.min_slope is not None:
            checks.append(_check('min_slope', slope >= acceptance.min_slope, slope, acceptance.min_slope))
        if acceptance.min_r_squared is not None:
            checks.append(_check('min_r_squared', r_squared >= acceptance.min_r_squared, r_squared,
                                 acceptance.min_r_squared))

    def _theorem_checks(self, checks: List[Dict[str, Any]]):
        bound = self.scenario.acceptance.scaled_spread_max
        if bound is None:
            return

        if not self.writer.exists('theorem.csv'):
            checks.append(_check('scaled_spread', False, None, bound, "theorem.csv missing"))
            return

        values = np.array([float(r['scaled_max']) for r in self.writer.read_csv('theorem.csv')])
        spread = float(values.max() / values.min()) if values.size and values.min() > 0 else math.inf
        checks.append(_check('scaled_spread', spread <= bound, spread, bound))

    def _harnack_checks(self, checks: List[Dict[str, Any]]):
        acceptance = self.scenario.acceptance
        wanted = (acceptance.harnack_ratio_spread, acceptance.min_sigma, acceptance.sigma_spread)
        if all(v is None for v in wanted):
            return

        if not self.writer.exists('harnack_summary.csv'):
            checks.append(_check('harnack', False, None, None, "harnack_summary.csv missing"))
            return

        summary = self.writer.read_csv('harnack_summary.csv')
        ratios = np.array([float(r['max_ratio']) for r in summary])
        sigmas = np.array([float(r['sigma_hat']) for r in summary])

        if acceptance.harnack_ratio_spread is not None:
            finite = ratios[np.isfinite(ratios)]
            spread = float(finite.max() / finite.min()) if finite.size == len(ratios) and finite.size else math.inf
            checks.append(_check('harnack_ratio_spread', spread < acceptance.harnack_ratio_spread, spread,
                                 acceptance.harnack_ratio_spread))

        defined = bool(np.all(np.isfinite(sigmas))) and sigmas.size > 0
        if acceptance.min_sigma is not None:
            low = float(sigmas.min()) if defined else None
            checks.append(_check('min_sigma', defined and low > acceptance.min_sigma, low, acceptance.min_sigma,
                                 "" if defined else "sigma_hat undefined for some epsilon"))
        if acceptance.sigma_spread is not None:
            gap = float(sigmas.max() - sigmas.min()) if defined else None
            limit = acceptance.sigma_spread * float(sigmas.max()) if defined else None
            checks.append(_check('sigma_spread', defined and gap <= limit, gap, limit))

    def _layer_checks(self, checks: List[Dict[str, Any]]):
        acceptance = self.scenario.acceptance
        if acceptance.layer_ratio_max is None and acceptance.y_norm_growth_max is None:
            return

        if not self.writer.exists('layers.csv'):
            checks.append(_check('layers', False, None, None, "layers.csv missing"))
            return

        results = _layered_from_csv(self.writer.read_csv('layers.csv'))
        if acceptance.layer_ratio_max is not None:
            growth = layer_ratio_growth(results)
            worst = max(growth.values()) if growth else None
            checks.append(_check('layer_ratio', worst is not None and worst <= acceptance.layer_ratio_max, worst,
                                 acceptance.layer_ratio_max))
        if acceptance.y_norm_growth_max is not None:
            growth = y_norm_growth(results)
            checks.append(_check('y_norm_growth', growth is not None and growth <= acceptance.y_norm_growth_max,
                                 growth, acceptance.y_norm_growth_max))

    def _coefficient_checks(self, checks: List[Dict[str, Any]]):
        acceptance = self.scenario.acceptance
        if self.scenario.geometry is None or (acceptance.eigen_factor is None and acceptance.holder_spread is None):
            return

        validator = PropertyValidator(self.scenario, workers=self.workers)
        outcomes = []
        if acceptance.eigen_factor is not None:
            outcomes.append(validator.check_coefficient_bounds())
        if acceptance.holder_spread is not None:
            outcomes.append(validator.check_holder_stability())

        for result in outcomes:
            checks.append(_check(result.name, result.passed, result.measured, result.threshold, result.error_message))

    def run_report(self) -> Dict[str, Any]:
        checks: List[Dict[str, Any]] = []
        self._fit_checks(checks)
        self._theorem_checks(checks)
        self._harnack_checks(checks)
        self._layer_checks(checks)
        self._coefficient_checks(checks)

        report = {
            'scenario_id': self.scenario.id,
            'generated_at': timestamp(),
            'passed': all(c['passed'] for c in checks),
            'checks': checks,
        }
        self.writer.write_report(report)

        failures = [c for c in checks if not c['passed']]
        for c in checks:
            symbol = "✅" if c['passed'] else "⚠️"
            bt.logging.info(f"{symbol} {c['name']}: measured {c['measured']} threshold {c['threshold']} {c['detail']}")

        if failures:
            raise AcceptanceError(f"{len(failures)} acceptance check(s) failed: "
                                  + ", ".join(c['name'] for c in failures), failures=failures)
        return report
