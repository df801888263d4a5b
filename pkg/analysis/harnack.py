"""
Oscillation and Harnack diagnostics over dyadic subdomains of the gap.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import bittensor as bt
import numpy as np
from scipy import stats

from core.errors import DegenerateDataError, DomainError, PositivityError
from discretize.grid import DiscreteField
from geometry.gap import GapGeometry, GapSubdomain
from transform.maps import FlattenMap, inverse

MIN_DYADIC_RADII = 4
SHIFT_UPPER = 'upper'
SHIFT_LOWER = 'lower'


@dataclass(frozen=True)
class OscDecayConfig:
    gamma: float
    r_min: float
    r_max: float

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")

        if not (0.0 < self.r_min < self.r_max):
            raise ValueError(f"need 0 < r_min < r_max, got [{self.r_min}, {self.r_max}]")


@dataclass(frozen=True)
class DyadicRadii:
    radii: np.ndarray
    widened: bool
    window: OscDecayConfig


@dataclass(frozen=True)
class HarnackMeasurement:
    ratio: float
    shift: str
    planar_warning: bool

    def __float__(self) -> float:
        return self.ratio


@dataclass(frozen=True)
class OscDecayFit:
    sigma: float
    step_ratios: np.ndarray
    stderr: float


@dataclass
class HarnackRow:
    r: float
    oscillation: float
    ratio_upper: Optional[float]
    ratio_lower: Optional[float]
    errors: List[str] = field(default_factory=list)

    @property
    def max_ratio(self) -> Optional[float]:
        ratios = [v for v in (self.ratio_upper, self.ratio_lower) if v is not None]
        return max(ratios) if ratios else None


def physical_nodes(u_field: DiscreteField, fmap: Optional[FlattenMap]) -> np.ndarray:
    z = u_field.grid.nodes()
    return z if fmap is None else inverse(fmap, z)


def _subdomain_values(u_field: DiscreteField, geom: GapGeometry, x0p, r: float,
                      points: np.ndarray, annulus: bool = False) -> np.ndarray:
    sub = GapSubdomain(np.asarray(x0p, dtype=float), float(r))
    lateral = points[..., :geom.lateral_dimension]
    mask = sub.annulus(lateral) if annulus else sub.contains(lateral)
    values = u_field.values[mask]
    if values.size == 0:
        kind = "annulus" if annulus else "subdomain"
        raise DomainError(f"{kind} of radius {r} around {np.asarray(x0p)} contains no grid nodes")

    return values


def oscillation(u_field: DiscreteField, geom: GapGeometry, x0p, r: float,
                fmap: Optional[FlattenMap] = None, points: Optional[np.ndarray] = None) -> float:
    """sup - inf of the nodal values over Omega_{x0,r}."""
    points = physical_nodes(u_field, fmap) if points is None else points
    values = _subdomain_values(u_field, geom, x0p, r, points)
    return float(values.max() - values.min())


def harnack_ratio(u_field: DiscreteField, geom: GapGeometry, x0p, r: float, shift,
                  fmap: Optional[FlattenMap] = None, points: Optional[np.ndarray] = None) -> HarnackMeasurement:
    """
    sup/inf of a shifted field on the annulus Omega_{x0,r} minus Omega_{x0,r/2}.

    shift 'upper' uses sup_{Omega_{x0,2r}} u - u, 'lower' uses u - inf_{Omega_{x0,2r}} u,
    and a number c uses u + c.
    """
    points = physical_nodes(u_field, fmap) if points is None else points
    annulus = _subdomain_values(u_field, geom, x0p, r, points, annulus=True)

    if shift == SHIFT_UPPER:
        shifted = _subdomain_values(u_field, geom, x0p, 2.0 * r, points).max() - annulus
    elif shift == SHIFT_LOWER:
        shifted = annulus - _subdomain_values(u_field, geom, x0p, 2.0 * r, points).min()
    else:
        shifted = annulus + float(shift)

    low = shifted.min()
    if low <= 0:
        raise PositivityError(f"shifted field ({shift}) reaches {low:.3e} on the annulus of radius {r}")

    planar = geom.n == 2
    if planar:
        bt.logging.trace("⚠️ Harnack ratio computed for n = 2, where the annulus estimate is not expected to hold")

    return HarnackMeasurement(ratio=float(shifted.max() / low), shift=str(shift), planar_warning=planar)


def dyadic_radii(delta: float, gamma: float, lateral_extent: float, x0p_norm: float = 0.0,
                 h_min: float = 0.0) -> DyadicRadii:
    """
    r_k = r_max 2^-k down to the window's lower end.

    The window is [5 delta, min(delta^(1-gamma), R_lat/2)]; when it holds
    fewer than four radii its lower end drops to max(5|x0'|, 2 h_min).
    """
    r_max = min(delta ** (1.0 - gamma), 0.5 * lateral_extent)

    def radii_above(r_min):
        count = int(math.floor(math.log2(r_max / r_min))) + 1 if r_min < r_max else 0
        return r_max * 2.0 ** -np.arange(max(count, 0))

    r_min = 5.0 * delta
    radii = radii_above(r_min)
    widened = False
    if len(radii) < MIN_DYADIC_RADII:
        r_min = max(5.0 * x0p_norm, 2.0 * h_min, np.finfo(float).tiny)
        radii = radii_above(r_min)
        widened = True
        bt.logging.debug(f"📏 Dyadic window [5 delta, delta^(1-gamma)] too narrow; widened to [{r_min:.3e}, {r_max:.3e}] "
                         f"with {len(radii)} radii")

    window = OscDecayConfig(gamma=gamma, r_min=min(r_min, 0.5 * r_max), r_max=r_max)
    return DyadicRadii(radii=radii, widened=widened, window=window)


def osc_decay_fit(radii: Sequence[float], oscillations: Sequence[float]) -> OscDecayFit:
    """Slope of log2(osc) against log2(r); per-step ratios osc(r)/osc(2r) for consecutive dyadic radii."""
    radii = np.asarray(radii, dtype=float)
    oscillations = np.asarray(oscillations, dtype=float)
    if len(radii) < MIN_DYADIC_RADII:
        raise DegenerateDataError(f"decay fit needs at least {MIN_DYADIC_RADII} radii, got {len(radii)}")

    if np.any(oscillations <= 0) or np.any(~np.isfinite(oscillations)):
        raise DegenerateDataError("oscillations must be positive for a decay fit")

    order = np.argsort(radii)[::-1]
    radii, oscillations = radii[order], oscillations[order]

    result = stats.linregress(np.log2(radii), np.log2(oscillations))
    return OscDecayFit(
        sigma=float(result.slope),
        step_ratios=oscillations[1:] / oscillations[:-1],
        stderr=float(result.stderr),
    )


def sigma_from_harnack(c1: float) -> float:
    """sigma with 2^-sigma = (C1 - 1)/(C1 + 1)."""
    if c1 < 1.0:
        raise ValueError(f"a Harnack constant is at least 1, got {c1}")

    if c1 == 1.0:
        return math.inf

    return -math.log2((c1 - 1.0) / (c1 + 1.0))


def harnack_profile(u_field: DiscreteField, geom: GapGeometry, x0p, radii: Sequence[float],
                    fmap: Optional[FlattenMap] = None, points: Optional[np.ndarray] = None) -> List[HarnackRow]:
    """Oscillation and both shifted Harnack ratios at each radius; failures are recorded per row."""
    points = physical_nodes(u_field, fmap) if points is None else points
    rows = []
    for r in radii:
        row = HarnackRow(r=float(r), oscillation=oscillation(u_field, geom, x0p, r, points=points),
                         ratio_upper=None, ratio_lower=None)
        for shift in (SHIFT_UPPER, SHIFT_LOWER):
            try:
                measurement = harnack_ratio(u_field, geom, x0p, r, shift, points=points)
                setattr(row, f"ratio_{shift}", measurement.ratio)
            except (PositivityError, DomainError) as e:
                row.errors.append(f"{shift}: {e}")
                bt.logging.warning(f"⚠️ Harnack ratio ({shift}) skipped at r = {r:.3e}: {e}")

        rows.append(row)

    return rows
