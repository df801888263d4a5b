"""
JSON schemas for scenario files and acceptance reports.
"""

from typing import Any, Dict, List

from jsonschema import Draft7Validator

NUMBER_LIST = {"type": "array", "items": {"type": "number"}, "minItems": 1}
POSITIVE = {"type": "number", "exclusiveMinimum": 0}


class ScenarioSchemas:
    """Structure of a parsed scenario and of report.json; unknown keys are rejected everywhere."""

    GEOMETRY_SCHEMA = {
        "type": "object",
        "properties": {
            "family": {"type": "string", "enum": ["ball", "quadratic", "monomials"]},
            "radius": POSITIVE,
            "Q": NUMBER_LIST,
            "coefficients": NUMBER_LIST,
            "epsilon": POSITIVE,
            "R0": POSITIVE,
            "kappa": POSITIVE,
            "dimension": {"type": "integer", "enum": [2, 3]},
        },
        "required": ["family", "R0", "kappa"],
        "additionalProperties": False,
    }

    COEFFICIENT_SCHEMA = {
        "type": "object",
        "properties": {
            "family": {"type": "string", "enum": ["identity", "smooth"]},
            "lambda": POSITIVE,
            "Lambda": POSITIVE,
            "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "amplitude": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
            "wavevector": NUMBER_LIST,
        },
        "required": ["family"],
        "additionalProperties": False,
    }

    BOUNDARY_SCHEMA = {
        "type": "object",
        "properties": {
            "family": {"type": "string", "enum": ["linear", "harmonic"]},
            "direction": NUMBER_LIST,
            "matrix": NUMBER_LIST,
            "constant": {"type": "number"},
        },
        "required": ["family"],
        "additionalProperties": False,
    }

    NUMERICS_SCHEMA = {
        "type": "object",
        "properties": {
            "lateral_cells": {"type": "integer", "minimum": 16},
            "vertical_cells": {"type": "integer", "minimum": 8},
            "c_grade": POSITIVE,
            "tol": POSITIVE,
            "max_iter": {"type": "integer", "minimum": 1},
            "gamma": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "preconditioner": {"type": "string", "enum": ["none", "jacobi", "line"]},
        },
        "additionalProperties": False,
    }

    SWEEP_SCHEMA = {
        "type": "object",
        "properties": {
            "epsilons": NUMBER_LIST,
            "fit": {"type": "string", "enum": ["global", "segment"]},
            "x0": NUMBER_LIST,
        },
        "required": ["epsilons"],
        "additionalProperties": False,
    }

    HARNACK_SCHEMA = {
        "type": "object",
        "properties": {
            "epsilons": NUMBER_LIST,
            "x0": NUMBER_LIST,
        },
        "required": ["epsilons"],
        "additionalProperties": False,
    }

    LAYERS_SCHEMA = {
        "type": "object",
        "properties": {
            "counts": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 64}, "minItems": 1},
            "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
            "dimension": {"type": "integer", "enum": [2, 3]},
            "cells": {"type": "integer", "minimum": 8},
            "amplitude": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.3},
            "mu": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "points_per_axis": {"type": "integer", "minimum": 4},
        },
        "required": ["counts", "seeds"],
        "additionalProperties": False,
    }

    ACCEPTANCE_SCHEMA = {
        "type": "object",
        "properties": {
            "slope_target": {"type": "number"},
            "slope_tolerance": POSITIVE,
            "min_slope": {"type": "number"},
            "min_r_squared": {"type": "number", "minimum": 0, "maximum": 1},
            "scaled_spread_max": POSITIVE,
            "harnack_ratio_spread": POSITIVE,
            "min_sigma": {"type": "number"},
            "sigma_spread": POSITIVE,
            "layer_ratio_max": POSITIVE,
            "y_norm_growth_max": {"type": "number", "minimum": 0},
            "eigen_factor": POSITIVE,
            "holder_spread": POSITIVE,
        },
        "additionalProperties": False,
    }

    SCENARIO_SCHEMA = {
        "type": "object",
        "properties": {
            "id": {"type": "string", "minLength": 1},
            "description": {"type": "string"},
            "geometry": GEOMETRY_SCHEMA,
            "coefficient": COEFFICIENT_SCHEMA,
            "boundary": BOUNDARY_SCHEMA,
            "numerics": NUMERICS_SCHEMA,
            "sweep": SWEEP_SCHEMA,
            "harnack": HARNACK_SCHEMA,
            "layers": LAYERS_SCHEMA,
            "acceptance": ACCEPTANCE_SCHEMA,
        },
        "required": ["id"],
        "additionalProperties": False,
    }

    CHECK_SCHEMA = {
        "type": "object",
        "properties": {
            "name": {"type": "string"},
            "passed": {"type": "boolean"},
            "measured": {"type": ["number", "null"]},
            "threshold": {"type": ["number", "string", "null"]},
            "detail": {"type": "string"},
        },
        "required": ["name", "passed", "measured", "threshold"],
        "additionalProperties": False,
    }

    REPORT_SCHEMA = {
        "type": "object",
        "properties": {
            "scenario_id": {"type": "string"},
            "generated_at": {"type": "string"},
            "passed": {"type": "boolean"},
            "checks": {"type": "array", "items": CHECK_SCHEMA},
        },
        "required": ["scenario_id", "generated_at", "passed", "checks"],
        "additionalProperties": False,
    }

    @classmethod
    def list_keys(cls) -> Dict[str, List[str]]:
        """Per-section keys whose values are lists, so a single value can be wrapped."""
        keys = {}
        for section, schema in cls.SCENARIO_SCHEMA["properties"].items():
            properties = schema.get("properties", {}) if isinstance(schema, dict) else {}
            keys[section] = [k for k, v in properties.items() if v.get("type") == "array"]

        return keys

    @classmethod
    def validate_structure(cls, data: Any, schema: Dict[str, Any]) -> tuple[bool, List[str]]:
        """
        Validate data against schema.

        Returns:
            Tuple of (is_valid, list_of_errors)
        """
        try:
            validator = Draft7Validator(schema)
            errors = sorted(validator.iter_errors(data), key=lambda e: [str(p) for p in e.path])

            if not errors:
                return True, []

            error_messages = []
            for error in errors:
                path = ".".join(str(p) for p in error.path) if error.path else "root"
                error_messages.append(f"{path}: {error.message}")

            return False, error_messages

        except Exception as e:
            return False, [f"Schema validation error: {str(e)}"]
