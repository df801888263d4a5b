from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from core.errors import DegenerateDataError

MIN_FIT_POINTS = 4


@dataclass(frozen=True)
class PowerLawFit:
    """log m = slope * log eps + intercept."""
    slope: float
    intercept: float
    stderr: float
    r_squared: float
    points: int

    @property
    def beta_estimate(self) -> float:
        return self.slope + 0.5


def _positive_logs(values: Sequence[float], name: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if np.any(~np.isfinite(values)) or np.any(values <= 0):
        raise DegenerateDataError(f"{name} must be positive and finite for a log-log fit")

    return np.log(values)


def fit_power_law(epsilons: Sequence[float], values: Sequence[float]) -> PowerLawFit:
    """Ordinary least squares on (log eps, log m)."""
    if len(epsilons) != len(values):
        raise ValueError(f"{len(epsilons)} epsilons but {len(values)} values")

    if len(epsilons) < MIN_FIT_POINTS:
        raise DegenerateDataError(f"power-law fit needs at least {MIN_FIT_POINTS} pairs, got {len(epsilons)}")

    x = _positive_logs(epsilons, "epsilons")
    y = _positive_logs(values, "values")

    result = stats.linregress(x, y)

    residual = y - (result.slope * x + result.intercept)
    ss_res = float(np.sum(residual ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        r_squared = 1.0 if ss_res == 0.0 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot

    return PowerLawFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        stderr=float(result.stderr),
        r_squared=r_squared,
        points=len(x),
    )
