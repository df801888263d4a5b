from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

import numpy as np

from analysis.fitting import MIN_FIT_POINTS, PowerLawFit, fit_power_law
from core.errors import DegenerateDataError
from core.protocol import FitTarget

SWEEP_COLUMNS = [
    'epsilon', 'delta0', 'max_grad_global', 'max_grad_segment', 'osc_r_list',
    'harnack_max_ratio', 'cg_iters', 'wall_time_s',
]
FIT_COLUMNS = ['scenario_id', 'slope', 'stderr', 'r_squared', 'sigma_hat', 'beta_hat']


def format_float(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return 'nan'

    return f"{value:.12g}"


@dataclass
class SweepRow:
    epsilon: float
    delta0: float
    max_grad_global: float
    max_grad_segment: float
    osc_radii: List[float]
    osc_values: List[float]
    harnack_max_ratio: Optional[float]
    cg_iters: int
    wall_time_s: float
    grid_shape: str = ""
    sigma_hat: Optional[float] = None
    scaled_max: Optional[float] = None
    u_sup: float = 0.0

    def osc_r_list(self) -> str:
        return ';'.join(f"{format_float(r)}:{format_float(o)}" for r, o in zip(self.osc_radii, self.osc_values))

    def to_csv_row(self) -> List[str]:
        return [
            format_float(self.epsilon), format_float(self.delta0), format_float(self.max_grad_global),
            format_float(self.max_grad_segment), self.osc_r_list(), format_float(self.harnack_max_ratio),
            str(self.cg_iters), f"{self.wall_time_s:.3f}",
        ]

    @classmethod
    def from_csv_row(cls, row: Dict[str, str]) -> "SweepRow":
        radii, values = [], []
        if row['osc_r_list']:
            for pair in row['osc_r_list'].split(';'):
                r, o = pair.split(':')
                radii.append(float(r))
                values.append(float(o))

        ratio = float(row['harnack_max_ratio'])
        return cls(
            epsilon=float(row['epsilon']),
            delta0=float(row['delta0']),
            max_grad_global=float(row['max_grad_global']),
            max_grad_segment=float(row['max_grad_segment']),
            osc_radii=radii,
            osc_values=values,
            harnack_max_ratio=None if np.isnan(ratio) else ratio,
            cg_iters=int(row['cg_iters']),
            wall_time_s=float(row['wall_time_s']),
        )


@dataclass
class SweepRecord:
    """Per-epsilon rows, kept sorted by epsilon descending, plus the fitted exponents."""
    scenario_id: str
    rows: List[SweepRow] = field(default_factory=list)
    skipped: Dict[float, str] = field(default_factory=dict)
    fit: Optional[PowerLawFit] = None
    sigma_estimate: Optional[float] = None

    def add(self, row: SweepRow):
        self.rows = [r for r in self.rows if r.epsilon != row.epsilon] + [row]
        self.rows.sort(key=lambda r: -r.epsilon)

    def merge(self, rows: Iterable[SweepRow]):
        """Order-independent: the result depends only on the set of rows."""
        for row in rows:
            self.add(row)

    def skip(self, epsilon: float, reason: str):
        self.skipped[float(epsilon)] = reason

    def series(self, target: FitTarget) -> tuple:
        target = FitTarget(target)
        epsilons = [r.epsilon for r in self.rows]
        values = [r.max_grad_global if target == FitTarget.GLOBAL else r.max_grad_segment for r in self.rows]
        return epsilons, values

    def fit_exponent(self, target: FitTarget) -> PowerLawFit:
        if len(self.rows) < MIN_FIT_POINTS:
            raise DegenerateDataError(f"only {len(self.rows)} epsilon rows survived; a fit needs {MIN_FIT_POINTS}")

        epsilons, values = self.series(target)
        self.fit = fit_power_law(epsilons, values)

        # decay rate measured at the smallest surviving epsilon
        sigmas = [r.sigma_hat for r in self.rows if r.sigma_hat is not None]
        self.sigma_estimate = sigmas[-1] if sigmas else None
        return self.fit

    def fit_csv_row(self) -> List[str]:
        fit = self.fit
        return [
            self.scenario_id, format_float(fit.slope), format_float(fit.stderr), format_float(fit.r_squared),
            format_float(self.sigma_estimate), format_float(fit.beta_estimate),
        ]
