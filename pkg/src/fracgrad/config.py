"""Run configuration: a strict JSON schema plus builders for the library objects.

Every section is optional at the schema level; commands that need a section
ask for it through :meth:`RunConfig.require`.  Unknown keys are rejected.
Module preconditions are checked by constructing the library objects, so a
config that loads is one every command can start from.
"""

from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass
from typing import Any

import jsonschema
import numpy as np

from .energy import FracParams
from .errors import ValidationError
from .grid import DomainMasks, GridSpec, ScalarField, box_masks, field_from_function
from .singular import QuadratureConfig
from .solver import Problem, SolverConfig

__all__ = ["SCHEMA", "SEED_ENV", "RunConfig", "load_config", "config_from_dict", "exterior_function"]

SEED_ENV = "FRACGRAD_SEED"

_interval = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_box = {"type": "array", "items": _interval, "minItems": 1, "maxItems": 3}
_box_or_null = {"anyOf": [_box, {"type": "null"}]}
_num = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}


def _obj(props: dict, required=()) -> dict:
    return {
        "type": "object",
        "properties": props,
        "required": list(required),
        "additionalProperties": False,
    }


_vec = {"type": "array", "items": _num, "minItems": 1, "maxItems": 3}

_exterior_term = {
    "oneOf": [
        _obj({"kind": {"const": "constant"}, "value": _num}, ["kind", "value"]),
        _obj(
            {
                "kind": {"const": "sine"},
                "amplitude": _num,
                "wavenumber": {"type": "array", "items": {"type": "integer"}, "minItems": 1, "maxItems": 3},
                "phase": _num,
            },
            ["kind", "wavenumber"],
        ),
        _obj(
            {"kind": {"const": "gaussian"}, "amplitude": _num, "center": _vec, "width": _num},
            ["kind", "center", "width"],
        ),
    ]
}

SCHEMA: dict = _obj(
    {
        "grid": _obj({"d": {"type": "integer"}, "n": {"type": "integer"}, "L": _num}, ["d", "n"]),
        "masks": _obj(
            {"omega": _box_or_null, "omega2": _box, "omega1": _box}, ["omega", "omega2", "omega1"]
        ),
        "params": _obj({"s": _num, "p": _num, "eps_reg": _num}, ["s", "p"]),
        "exterior": {"type": "array", "items": _exterior_term, "minItems": 1},
        "solver": _obj(
            {
                "tol": {"type": ["number", "null"]},
                "max_iters": {"type": "integer"},
                "step0": _num,
                "shrink": _num,
                "armijo": _num,
                "precondition_order": {"type": ["number", "null"]},
            }
        ),
        "quadrature": _obj(
            {
                "R_max": {"type": ["number", "null"]},
                "inner_exclusion": {"type": "integer"},
                "treat_as": {"enum": ["periodic", "compact-support-on-Rd"]},
                "singular_correction": {"type": "boolean"},
            }
        ),
        "experiment": _obj(
            {
                "grid_sizes": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                "kernel_grid_sizes": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                "radii": {"type": "array", "items": _num, "minItems": 4},
                "samples": _pos_int,
                "seed": {"type": "integer", "minimum": 0},
                "cutoff_width": {"type": ["number", "null"]},
                "kmax": _pos_int,
                "schur_stride": _pos_int,
                "omega1_sweep": {"type": "array", "items": _box},
                "test_functions": _pos_int,
            }
        ),
    }
)

_EXPERIMENT_DEFAULTS = {
    "samples": 50,
    "seed": 0,
    "cutoff_width": None,
    "kmax": 6,
    "schur_stride": 1,
    "test_functions": 10,
}


def exterior_function(terms: list[dict], L: float):
    """Sum of the configured terms as a function of broadcast coordinate arrays."""

    def f(*x):
        out = np.zeros(np.broadcast(*x).shape)
        for t in terms:
            kind = t["kind"]
            if kind == "constant":
                out = out + t["value"]
            elif kind == "sine":
                k = t["wavenumber"]
                if len(k) != len(x):
                    raise ValidationError("sine wavenumber length must equal d")
                ph = sum(2 * np.pi * kj * xj / L for kj, xj in zip(k, x))
                out = out + t.get("amplitude", 1.0) * np.sin(ph + t.get("phase", 0.0))
            else:  # gaussian, periodised by the nearest image
                c = t["center"]
                if len(c) != len(x):
                    raise ValidationError("gaussian center length must equal d")
                w = t["width"]
                if not w > 0:
                    raise ValidationError("gaussian width must be positive")
                r2 = 0
                for cj, xj in zip(c, x):
                    dx = (xj - cj) - L * np.round((xj - cj) / L)
                    r2 = r2 + dx * dx
                out = out + t.get("amplitude", 1.0) * np.exp(-r2 / (w * w))
        return out

    return f


@dataclass(frozen=True)
class RunConfig:
    raw: dict

    def require(self, *sections: str) -> None:
        missing = [s for s in sections if s not in self.raw]
        if missing:
            raise ValidationError(f"config is missing section(s): {', '.join(missing)}")

    # --- builders -------------------------------------------------------

    def grid(self, n: int | None = None) -> GridSpec:
        g = self.raw["grid"]
        return GridSpec(g["d"], n if n is not None else g["n"], g.get("L", 1.0))

    def params(self) -> FracParams:
        p = self.raw["params"]
        return FracParams(p["s"], p["p"], p.get("eps_reg", 0.0))

    def masks(self, spec: GridSpec, omega1=None) -> DomainMasks:
        m = self.raw["masks"]
        return box_masks(spec, m["omega"], m["omega2"], omega1 if omega1 is not None else m["omega1"])

    def solver(self) -> SolverConfig:
        return SolverConfig(**self.raw.get("solver", {}))

    def quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(**self.raw.get("quadrature", {}))

    def exterior(self, spec: GridSpec) -> ScalarField:
        return field_from_function(spec, exterior_function(self.raw["exterior"], spec.L))

    def problem(self, n: int | None = None) -> Problem:
        spec = self.grid(n)
        return Problem(spec, self.masks(spec), self.exterior(spec), self.params())

    def experiment(self) -> dict:
        out = dict(_EXPERIMENT_DEFAULTS)
        out.update(self.raw.get("experiment", {}))
        env = os.environ.get(SEED_ENV)
        if env is not None:
            try:
                out["seed"] = int(env)
            except ValueError:
                raise ValidationError(f"{SEED_ENV}={env!r} is not an integer") from None
            if out["seed"] < 0:
                raise ValidationError(f"{SEED_ENV} must be nonnegative")
        return out

    def validate(self) -> None:
        """Construct every configured object once so module preconditions fail early."""
        raw = self.raw
        if "grid" in raw:
            spec = self.grid()
            for n in raw.get("experiment", {}).get("grid_sizes", []):
                self.grid(n)
            for n in raw.get("experiment", {}).get("kernel_grid_sizes", []):
                self.grid(n)
            if "masks" in raw:
                self.masks(spec)
                for box in raw.get("experiment", {}).get("omega1_sweep", []):
                    self.masks(spec, box)
            if "exterior" in raw:
                self.exterior(spec)
        if "params" in raw:
            self.params()
        self.solver()
        self.quadrature()
        exp = self.experiment()
        sizes = exp.get("grid_sizes")
        if sizes is not None and any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValidationError("experiment.grid_sizes must be strictly increasing")
        radii = exp.get("radii")
        if radii is not None:
            if any(not r > 0 for r in radii):
                raise ValidationError("experiment.radii must be positive")
            for a, b in zip(radii, radii[1:]):
                if not math.isclose(b, a / 2, rel_tol=1e-9):
                    raise ValidationError("experiment.radii must halve at each step")
        w = exp.get("cutoff_width")
        if w is not None and not w > 0:
            raise ValidationError("experiment.cutoff_width must be positive")


def load_config(path) -> RunConfig:
    """Parse, schema-check and precondition-check a JSON config file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_dict(raw)


def config_from_dict(raw: Any) -> RunConfig:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"config error at {where}: {exc.message}") from None
    cfg = RunConfig(copy.deepcopy(raw))
    cfg.validate()
    return cfg
