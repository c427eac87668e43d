"""Scenario configs: JSON schema, loading, emission and the built-in registry."""

from __future__ import annotations

import copy
import json
import math
import warnings
from dataclasses import dataclass, field, fields

import jsonschema
import numpy as np

from . import exprparser
from .geometry import Box, ConvexBody, HPolytope
from .inclusion import BUILTIN_DRIFTS, InclusionRHS, estimate_lipschitz
from .scheme import LIPSCHITZ_FLOOR, VARIANTS, SchemeParams, validate

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "SCHEMA",
    "BUILTINS",
    "builtin",
    "load_config",
    "config_from_dict",
    "emit_config",
]


class ConfigError(ValueError):
    pass


_vec = {"type": "array", "items": {"type": "number"}, "minItems": 1}

SCHEMA = {
    "type": "object",
    "required": ["name", "dim", "drift", "disturbance", "X0", "h", "T"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "dim": {"type": "integer", "minimum": 1, "maximum": 3},
        "drift": {
            "oneOf": [
                {"type": "array", "items": {"type": "string"}, "minItems": 1},
                {"type": "string", "enum": sorted(BUILTIN_DRIFTS)},
            ]
        },
        "disturbance": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["type", "radius"],
                    "additionalProperties": False,
                    "properties": {"type": {"const": "box"}, "radius": {"type": "number", "minimum": 0}},
                },
                {
                    "type": "object",
                    "required": ["type", "halfspaces", "bbox"],
                    "additionalProperties": False,
                    "properties": {
                        "type": {"const": "hpolytope"},
                        "halfspaces": {
                            "type": "array",
                            "minItems": 1,
                            "items": {
                                "type": "object",
                                "required": ["normal", "offset"],
                                "properties": {"normal": _vec, "offset": {"type": "number"}},
                            },
                        },
                        "bbox": {
                            "type": "object",
                            "required": ["lo", "hi"],
                            "properties": {"lo": _vec, "hi": _vec},
                        },
                    },
                },
            ]
        },
        "X0": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["type", "point"],
                    "additionalProperties": False,
                    "properties": {"type": {"const": "point"}, "point": _vec},
                },
                {
                    "type": "object",
                    "required": ["type", "points"],
                    "additionalProperties": False,
                    "properties": {"type": {"const": "points"}, "points": {"type": "array", "items": _vec, "minItems": 1}},
                },
                {
                    "type": "object",
                    "required": ["type", "lo", "hi"],
                    "additionalProperties": False,
                    "properties": {"type": {"const": "box"}, "lo": _vec, "hi": _vec},
                },
                {
                    "type": "object",
                    "required": ["type", "r_in", "r_out"],
                    "additionalProperties": False,
                    "properties": {
                        "type": {"const": "annulus"},
                        "r_in": {"type": "number", "minimum": 0},
                        "r_out": {"type": "number", "minimum": 0},
                    },
                },
                {
                    "type": "object",
                    "required": ["type", "cells"],
                    "additionalProperties": False,
                    "properties": {
                        "type": {"const": "cells"},
                        "cells": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}, "minItems": 1},
                    },
                },
            ]
        },
        "L": {"type": ["number", "null"], "minimum": 0},
        "lipschitz_domain": {
            "type": "object",
            "required": ["lo", "hi"],
            "properties": {"lo": _vec, "hi": _vec},
        },
        "h": {"type": "number", "exclusiveMinimum": 0},
        "T": {"type": "number", "minimum": 0},
        "rho": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "beta_star": {"type": "number", "minimum": 0},
        "scheme": {"enum": list(VARIANTS)},
        "strict_connectivity": {"type": "boolean"},
        "kappa_override": {"type": ["number", "null"], "minimum": 0},
    },
}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    dim: int
    drift: tuple | str
    disturbance: dict
    X0: dict
    h: float
    T: float
    L: float | None = None
    rho: float | None = None
    beta_star: float = 0.0
    scheme: str = "boundary"
    strict_connectivity: bool = True
    kappa_override: float | None = None
    lipschitz_domain: dict | None = None

    @property
    def spacing(self) -> float:
        return self.rho if self.rho is not None else self.h**2

    @property
    def n_steps(self) -> int:
        n = round(self.T / self.h)
        if not math.isclose(n * self.h, self.T, rel_tol=1e-9, abs_tol=1e-12):
            raise ConfigError(f"T={self.T} is not a multiple of h={self.h}")
        return n

    def replace(self, **changes) -> ScenarioConfig:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update({k: v for k, v in changes.items() if v is not None})
        return ScenarioConfig(**data)

    def disturbance_body(self) -> ConvexBody:
        d = self.disturbance
        if d["type"] == "box":
            return ConvexBody(Box.centered(np.zeros(self.dim), d["radius"]))
        hs = d["halfspaces"]
        return ConvexBody(
            HPolytope([s["normal"] for s in hs], [s["offset"] for s in hs], Box(d["bbox"]["lo"], d["bbox"]["hi"]))
        )

    def rhs(self) -> InclusionRHS:
        return InclusionRHS(self.dim, self.drift, self.disturbance_body(), lipschitz=self.lipschitz()[0], name=self.name)

    def lipschitz(self) -> tuple[float, bool]:
        """(L, certified).  A missing L is estimated by sampling and is never certified."""
        if self.L is not None:
            return max(self.L, LIPSCHITZ_FLOOR), True
        dom = self.lipschitz_domain or {"lo": [-1.5] * self.dim, "hi": [1.5] * self.dim}
        raw = InclusionRHS(self.dim, self.drift, self.disturbance_body())
        est = estimate_lipschitz(raw, Box(dom["lo"], dom["hi"]))
        return max(est.value, LIPSCHITZ_FLOOR), False

    def initial_set(self):
        """X0 as a convex body, a list of bodies, or explicit cells."""
        from .grid import GridSet

        x = self.X0
        kind = x["type"]
        if kind == "point":
            return Box.point(x["point"])
        if kind == "points":
            return [Box.point(p) for p in x["points"]]
        if kind == "box":
            return Box(x["lo"], x["hi"])
        if kind == "cells":
            return GridSet(self.dim, self.spacing, [tuple(c) for c in x["cells"]])
        r_in, r_out = x["r_in"], x["r_out"]
        if self.dim != 2 or not r_in < r_out:
            raise ConfigError("annulus initial sets need dim=2 and r_in < r_out")
        return [
            Box([-r_out, r_in], [r_out, r_out]),
            Box([-r_out, -r_out], [r_out, -r_in]),
            Box([-r_out, -r_in], [-r_in, r_in]),
            Box([r_in, -r_in], [r_out, r_in]),
        ]

    def params(self) -> SchemeParams:
        L = self.lipschitz()[0]
        # the step-size gate comes first so its message is not masked by a T/h mismatch
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            validate(L, self.h, self.spacing, self.beta_star, 0, self.kappa_override)
        return validate(L, self.h, self.spacing, self.beta_star, self.n_steps, self.kappa_override)


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path)


def config_from_dict(data: dict) -> ScenarioConfig:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{_pointer(exc.absolute_path)}: {exc.message}") from None
    data = copy.deepcopy(data)
    dim = data["dim"]
    drift = data["drift"]
    if isinstance(drift, list):
        if len(drift) != dim:
            raise ConfigError(f"/drift: need {dim} components, got {len(drift)}")
        for i, src in enumerate(drift):
            try:
                exprparser.parse(src, dim)
            except exprparser.ExprError as exc:
                raise ConfigError(f"/drift/{i}: {exc}") from None
        data["drift"] = tuple(drift)
    if "X0" in data and data["X0"]["type"] == "cells":
        data["X0"]["cells"] = [list(c) for c in data["X0"]["cells"]]
    cfg = ScenarioConfig(**data)
    if cfg.h <= 0 or cfg.n_steps < 0:
        raise ConfigError("/h: invalid step size")
    return cfg


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return config_from_dict(data)


def emit_config(cfg: ScenarioConfig) -> dict:
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        out[f.name] = list(v) if isinstance(v, tuple) else copy.deepcopy(v)
    return out


MUSTACHE_DRIFT = ("x1*(1-abs(x1)) - x1*x2", "x1^4 - 1/2")

BUILTINS = {
    "linear2d": ScenarioConfig(
        name="linear2d",
        dim=2,
        drift=("x1", "x2"),
        disturbance={"type": "box", "radius": 1.0},
        X0={"type": "point", "point": [0.0, 0.0]},
        h=0.2,
        T=1.0,
        L=1.0,
    ),
    # The sampled bound over [-1.5, 1.5]^2 is 14.85, which would force h <= 1/60.
    # L = 10 is the largest value that admits h = 0.025 (h = h*, so validate warns).
    "mustache": ScenarioConfig(
        name="mustache",
        dim=2,
        drift=MUSTACHE_DRIFT,
        disturbance={"type": "box", "radius": 0.2},
        X0={"type": "point", "point": [0.0, 0.0]},
        h=0.025,
        T=5.3,
        L=10.0,
    ),
    "annulus": ScenarioConfig(
        name="annulus",
        dim=2,
        drift="zero",
        disturbance={"type": "box", "radius": 1.0},
        X0={"type": "annulus", "r_in": 1.0, "r_out": 2.0},
        h=0.2,
        T=1.2,
        L=0.0,
        rho=0.04,
    ),
    "twopoints": ScenarioConfig(
        name="twopoints",
        dim=2,
        drift="zero",
        disturbance={"type": "box", "radius": 1.0},
        X0={"type": "points", "points": [[0.0, 1.0], [1.0, 0.0]]},
        h=0.25,
        T=0.25,
        L=0.0,
        rho=1 / 16,
    ),
    # two points six cells apart diagonally: their first images overlap and the
    # final boundary scheme misplaces boundary cells, the preliminary one does not
    "twopoints_close": ScenarioConfig(
        name="twopoints_close",
        dim=2,
        drift="zero",
        disturbance={"type": "box", "radius": 1.0},
        X0={"type": "points", "points": [[0.0, 1.0], [0.375, 0.625]]},
        h=0.25,
        T=0.25,
        L=0.0,
        rho=1 / 16,
    ),
}


def builtin(name: str) -> ScenarioConfig:
    try:
        return BUILTINS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; built-ins: {', '.join(BUILTINS)}") from None
