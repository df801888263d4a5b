"""
Scenario files: flat `section.key = value` lines, `#` comments, comma lists.

Text is parsed into a nested dict, checked against the scenario schema (which
rejects every unknown key) and then materialized into pydantic models that
build the geometry, coefficient and boundary objects.
"""

import math
import re
from typing import Any, Dict, List, Literal, Optional

import bittensor as bt
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from cli.scenario_schemas import ScenarioSchemas
from config.config import appConfig as config
from core.errors import ConfigurationError
from core.protocol import BoundaryFamily, CoefficientFamily, FitTarget, GapfieldProtocol, PreconditionerKind, Side
from discretize.boundary import BoundaryData
from geometry.gap import GapGeometry
from geometry.profiles import InclusionProfile
from transform.coefficients import CoefficientField

INTEGER_PATTERN = re.compile(r'^[+-]?\d+$')
TOP_LEVEL_KEYS = ('id', 'description')


def _parse_atom(text: str) -> Any:
    text = text.strip()
    if INTEGER_PATTERN.match(text):
        return int(text)

    lowered = text.lower()
    if lowered in ('true', 'false'):
        return lowered == 'true'

    try:
        return float(text)
    except ValueError:
        return text


def parse_scenario_text(text: str, source: str = "<scenario>") -> Dict[str, Any]:
    """Flat key/value text into {section: {key: value}} plus the top-level id and description."""
    data: Dict[str, Any] = {}
    list_keys = ScenarioSchemas.list_keys()
    seen = set()

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue

        if '=' not in line:
            raise ConfigurationError(f"{source}:{number}: expected 'key = value', got {raw.strip()!r}")

        key, value = (part.strip() for part in line.split('=', 1))
        if not key or not value:
            raise ConfigurationError(f"{source}:{number}: empty key or value", keys=[key or '?'])

        if key in seen:
            raise ConfigurationError(f"{source}:{number}: duplicate key {key}", keys=[key])
        seen.add(key)

        parts = key.split('.')
        if len(parts) == 1:
            if key not in TOP_LEVEL_KEYS:
                raise ConfigurationError(f"{source}:{number}: unknown key {key}", keys=[key])
            data[key] = value
            continue

        if len(parts) != 2:
            raise ConfigurationError(f"{source}:{number}: keys have the form section.key, got {key}", keys=[key])

        section, name = parts
        if ',' in value:
            parsed = [_parse_atom(v) for v in value.split(',') if v.strip()]
        else:
            parsed = _parse_atom(value)
            if name in list_keys.get(section, []):
                parsed = [parsed]

        data.setdefault(section, {})[name] = parsed

    return data


def unknown_keys(data: Dict[str, Any]) -> List[str]:
    """Dotted names of every key the scenario schema does not declare."""
    sections = ScenarioSchemas.SCENARIO_SCHEMA["properties"]
    unknown = []
    for section, value in data.items():
        if section not in sections:
            names = value.keys() if isinstance(value, dict) else []
            unknown.extend([f"{section}.{k}" for k in names] or [section])
            continue

        if isinstance(value, dict):
            declared = sections[section].get("properties", {})
            unknown.extend(f"{section}.{k}" for k in value if k not in declared)

    return sorted(unknown)


class GeometryBlock(BaseModel):
    model_config = ConfigDict(extra='forbid')

    family: Literal['ball', 'quadratic', 'monomials']
    radius: float = Field(1.0, gt=0, description="Ball radius")
    Q: Optional[List[float]] = Field(None, description="Gap matrix, row-major; f - g = x'^T Q x'")
    coefficients: Optional[List[float]] = Field(None, description="c_k of f - g = sum_k c_k |x'|^(2k)")
    epsilon: Optional[float] = Field(None, gt=0, description="Separation used when no sweep is given")
    R0: float = Field(..., gt=0)
    kappa: float = Field(..., gt=0)
    dimension: Optional[int] = Field(None, description="n, 2 or 3")

    @model_validator(mode='after')
    def check_family_data(self) -> "GeometryBlock":
        if self.family == 'quadratic':
            if not self.Q:
                raise ValueError("quadratic geometry needs geometry.Q")

            side = math.isqrt(len(self.Q))
            if side * side != len(self.Q) or side not in (1, 2):
                raise ValueError(f"geometry.Q must hold 1 or 4 entries, got {len(self.Q)}")

            if self.dimension is not None and self.dimension != side + 1:
                raise ValueError(f"geometry.Q is {side}x{side} but geometry.dimension is {self.dimension}")

            self.dimension = side + 1

        if self.dimension is None:
            raise ValueError(f"{self.family} geometry needs geometry.dimension")

        if self.family == 'monomials' and not self.coefficients:
            raise ValueError("monomials geometry needs geometry.coefficients")

        return self

    @property
    def Q_matrix(self) -> np.ndarray:
        side = math.isqrt(len(self.Q))
        return np.asarray(self.Q, dtype=float).reshape(side, side)

    def build(self, epsilon: float) -> GapGeometry:
        n = self.dimension
        if self.family == 'ball':
            return GapGeometry.balls(self.radius, epsilon, self.R0, self.kappa, n)

        if self.family == 'quadratic':
            return GapGeometry.quadratic(self.Q_matrix, epsilon, self.R0, self.kappa)

        half = [0.5 * c for c in self.coefficients]
        return GapGeometry(
            f=InclusionProfile.monomials(half, Side.UPPER, n - 1),
            g=InclusionProfile.monomials(half, Side.LOWER, n - 1),
            epsilon=epsilon, R0=self.R0, kappa=self.kappa, n=n,
        )


class CoefficientBlock(BaseModel):
    model_config = ConfigDict(extra='forbid', populate_by_name=True)

    family: CoefficientFamily = CoefficientFamily.IDENTITY
    lam: float = Field(1.0, gt=0, alias='lambda', description="Declared lower ellipticity bound")
    Lam: float = Field(1.0, gt=0, alias='Lambda', description="Declared upper ellipticity bound")
    alpha: float = Field(0.5, gt=0, lt=1)
    amplitude: float = Field(0.0, ge=0, lt=1)
    wavevector: Optional[List[float]] = None

    @model_validator(mode='after')
    def check_bounds(self) -> "CoefficientBlock":
        if self.lam > self.Lam:
            raise ValueError(f"coefficient.lambda = {self.lam} exceeds coefficient.Lambda = {self.Lam}")

        if self.family == CoefficientFamily.LAYERED:
            raise ValueError("layered coefficients are configured through the layers section")

        return self

    def build(self, n: int) -> CoefficientField:
        if self.family == CoefficientFamily.IDENTITY:
            field = CoefficientField.identity(n, self.alpha)
        else:
            wavevector = self.wavevector or [math.pi] * n
            if len(wavevector) != n:
                raise ConfigurationError(f"coefficient.wavevector needs {n} components", keys=['coefficient.wavevector'])
            field = CoefficientField.smooth(n, self.amplitude, wavevector, self.alpha)

        if field.lam < self.lam - 1e-12 or field.Lam > self.Lam + 1e-12:
            raise ConfigurationError(
                f"{self.family.value} coefficient has bounds [{field.lam}, {field.Lam}] outside the declared "
                f"[{self.lam}, {self.Lam}]", keys=['coefficient.lambda', 'coefficient.Lambda'],
            )

        return field


class BoundaryBlock(BaseModel):
    model_config = ConfigDict(extra='forbid')

    family: BoundaryFamily = BoundaryFamily.LINEAR
    direction: Optional[List[float]] = None
    matrix: Optional[List[float]] = None
    constant: float = 0.0

    @field_validator('family')
    @classmethod
    def check_family(cls, value: BoundaryFamily) -> BoundaryFamily:
        if value == BoundaryFamily.CUSTOM:
            raise ValueError("custom boundary data cannot be given in a scenario file")
        return value

    def build(self, n: int) -> BoundaryData:
        direction = self.direction
        if direction is not None and len(direction) != n:
            raise ConfigurationError(f"boundary.direction needs {n} components", keys=['boundary.direction'])

        if self.family == BoundaryFamily.LINEAR:
            direction = direction if direction is not None else np.eye(n)[0]
            return BoundaryData.linear(direction, self.constant)

        if not self.matrix or len(self.matrix) != n * n:
            raise ConfigurationError(f"boundary.matrix needs {n * n} entries", keys=['boundary.matrix'])

        try:
            return BoundaryData.harmonic(np.asarray(self.matrix, dtype=float).reshape(n, n), direction, self.constant)
        except ValueError as e:
            raise ConfigurationError(str(e), keys=['boundary.matrix']) from e


class NumericsBlock(BaseModel):
    model_config = ConfigDict(extra='forbid')

    lateral_cells: int = Field(128, ge=16)
    vertical_cells: int = Field(default_factory=lambda: config.DEFAULT_VERTICAL_CELLS, ge=8)
    c_grade: float = Field(default_factory=lambda: config.DEFAULT_C_GRADE, gt=0)
    tol: float = Field(default_factory=lambda: config.DEFAULT_TOL, gt=0)
    max_iter: int = Field(default_factory=lambda: config.DEFAULT_MAX_ITER, ge=1)
    gamma: float = Field(default_factory=lambda: config.DEFAULT_GAMMA, gt=0, lt=1)
    preconditioner: PreconditionerKind = Field(default_factory=lambda: PreconditionerKind(config.DEFAULT_PRECONDITIONER))


def _check_epsilons(values: List[float], min_length: int, key: str) -> List[float]:
    if not GapfieldProtocol.validate_epsilons(values, min_length=min_length):
        raise ValueError(f"{key} must be positive and strictly decreasing with at least {min_length} values")
    return [float(v) for v in values]


class SweepBlock(BaseModel):
    model_config = ConfigDict(extra='forbid')

    epsilons: List[float]
    fit: FitTarget = FitTarget.GLOBAL
    x0: Optional[List[float]] = None

    @field_validator('epsilons')
    @classmethod
    def check_epsilons(cls, value: List[float]) -> List[float]:
        return _check_epsilons(value, 4, 'sweep.epsilons')


class HarnackBlock(BaseModel):
    model_config = ConfigDict(extra='forbid')

    epsilons: List[float]
    x0: Optional[List[float]] = None

    @field_validator('epsilons')
    @classmethod
    def check_epsilons(cls, value: List[float]) -> List[float]:
        return _check_epsilons(value, 1, 'harnack.epsilons')


class LayersBlock(BaseModel):
    model_config = ConfigDict(extra='forbid')

    counts: List[int]
    seeds: List[int]
    dimension: int = 2
    cells: int = Field(128, ge=8)
    amplitude: float = Field(0.3, gt=0, le=0.3)
    mu: float = Field(0.5, gt=0, lt=1)
    points_per_axis: int = Field(64, ge=4)

    @field_validator('counts')
    @classmethod
    def check_counts(cls, value: List[int]) -> List[int]:
        if any(not (1 <= l <= 64) for l in value):
            raise ValueError("layer counts must lie in [1, 64]")
        return sorted(set(value))


class AcceptanceBlock(BaseModel):
    model_config = ConfigDict(extra='forbid')

    slope_target: Optional[float] = None
    slope_tolerance: Optional[float] = None
    min_slope: Optional[float] = None
    min_r_squared: Optional[float] = None
    scaled_spread_max: Optional[float] = None
    harnack_ratio_spread: Optional[float] = None
    min_sigma: Optional[float] = None
    sigma_spread: Optional[float] = None
    layer_ratio_max: Optional[float] = None
    y_norm_growth_max: Optional[float] = None
    eigen_factor: Optional[float] = None
    holder_spread: Optional[float] = None


class Scenario(BaseModel):
    model_config = ConfigDict(extra='forbid')

    id: str = Field(..., min_length=1)
    description: str = ""
    geometry: Optional[GeometryBlock] = None
    coefficient: CoefficientBlock = Field(default_factory=CoefficientBlock)
    boundary: BoundaryBlock = Field(default_factory=BoundaryBlock)
    numerics: NumericsBlock = Field(default_factory=NumericsBlock)
    sweep: Optional[SweepBlock] = None
    harnack: Optional[HarnackBlock] = None
    layers: Optional[LayersBlock] = None
    acceptance: AcceptanceBlock = Field(default_factory=AcceptanceBlock)

    @model_validator(mode='after')
    def check_sections(self) -> "Scenario":
        if (self.sweep or self.harnack) and self.geometry is None:
            raise ValueError("sweep and harnack sections need a geometry section")

        n = self.dimension
        for name, block in (('sweep', self.sweep), ('harnack', self.harnack)):
            if block is not None and block.x0 is not None and len(block.x0) != n - 1:
                raise ValueError(f"{name}.x0 needs {n - 1} components")

        return self

    @property
    def dimension(self) -> int:
        return self.geometry.dimension if self.geometry is not None else self.layers.dimension if self.layers else 2

    @property
    def solve_epsilon(self) -> float:
        if self.sweep is not None:
            return self.sweep.epsilons[0]

        if self.geometry is not None and self.geometry.epsilon is not None:
            return self.geometry.epsilon

        if self.harnack is not None:
            return self.harnack.epsilons[0]

        raise ConfigurationError("no epsilon: set sweep.epsilons, harnack.epsilons or geometry.epsilon", keys=['geometry.epsilon'])

    def require(self, section: str):
        if getattr(self, section) is None:
            raise ConfigurationError(f"scenario {self.id} has no {section} section", keys=[section])
        return getattr(self, section)

    def build_geometry(self, epsilon: Optional[float] = None) -> GapGeometry:
        geometry = self.require('geometry')
        epsilon = self.solve_epsilon if epsilon is None else epsilon
        try:
            return geometry.build(epsilon)
        except ValueError as e:
            raise ConfigurationError(str(e), keys=['geometry']) from e

    def build_coefficient(self) -> CoefficientField:
        return self.coefficient.build(self.dimension)

    def build_boundary(self) -> BoundaryData:
        return self.boundary.build(self.dimension)

    def x0(self, section: str) -> np.ndarray:
        block = getattr(self, section)
        values = block.x0 if block is not None and block.x0 is not None else [0.0] * (self.dimension - 1)
        return np.asarray(values, dtype=float)


def _error_keys(error: ValidationError) -> List[str]:
    keys = []
    for item in error.errors():
        location = [str(p) for p in item.get('loc', ()) if not isinstance(p, int)]
        keys.append(".".join(location) if location else "root")
    return sorted(set(keys))


def scenario_from_text(text: str, source: str = "<scenario>") -> Scenario:
    data = parse_scenario_text(text, source)

    unknown = unknown_keys(data)
    if unknown:
        raise ConfigurationError(f"{source}: unknown keys {', '.join(unknown)}", keys=unknown)

    is_valid, errors = ScenarioSchemas.validate_structure(data, ScenarioSchemas.SCENARIO_SCHEMA)
    if not is_valid:
        keys = sorted({e.split(':', 1)[0] for e in errors})
        raise ConfigurationError(f"{source}: " + "; ".join(errors), keys=keys)

    try:
        scenario = Scenario.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"{source}: {e}", keys=_error_keys(e)) from e

    # family-level checks (SPD matrices, boundary shapes) surface before any solve
    if scenario.geometry is not None:
        scenario.build_geometry()
    scenario.build_coefficient()
    scenario.build_boundary()

    bt.logging.debug(f"🔧 Scenario {scenario.id} loaded from {source}")
    return scenario


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, 'r') as handle:
            text = handle.read()
    except OSError as e:
        raise ConfigurationError(f"cannot read scenario {path}: {e}", keys=['--config']) from e

    return scenario_from_text(text, source=path)
