"""Scheme parameters and the three steppers.

* ``step_full``: the fully discrete Euler scheme on the whole set.
* ``step_boundary_preliminary``: evolves only the boundary and the first
  exterior layer, using full images of the boundary cells.
* ``step_boundary``: the final boundary scheme, which replaces those full
  images by their intersection with a kappa-band around the image boundary.

Both boundary steppers reproduce the layers of the full scheme exactly for
chain-connected initial sets when the parameters pass ``validate``.
"""

from __future__ import annotations

import json
import math
import os
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .geometry import ConvexBody, as_body, rasterize
from .grid import (
    BoundaryState,
    GridSet,
    adjacent_filter,
    connected_components,
    derive_adjacent_layers,
    extract_layers,
    is_chain_connected,
    union_all,
)
from .inclusion import InclusionRHS, batch_hollow, batch_images

__all__ = [
    "ParameterError",
    "SchemeError",
    "ConnectivityError",
    "SchemeParams",
    "FullState",
    "validate",
    "init_full",
    "init_boundary",
    "step_full",
    "step_boundary_preliminary",
    "step_boundary",
    "source_count",
    "run",
    "RunReport",
    "default_workers",
    "VARIANTS",
]

VARIANTS = ("full", "preliminary", "boundary")
LIPSCHITZ_FLOOR = 1e-6
KAPPA_NOTE = "kappa_hat uses dist(y, M) <= 2 rho for y in the first two exterior layers"


class ParameterError(ValueError):
    pass


class SchemeError(RuntimeError):
    pass


class ConnectivityError(SchemeError):
    pass


def default_workers() -> int:
    return max(1, int(os.environ.get("INCLUSION_REACH_THREADS", "1")))


@dataclass(frozen=True)
class SchemeParams:
    L: float
    h: float
    rho: float
    beta_star: float = 0.0
    n_steps: int = 0
    kappa_override: float | None = None
    alpha_star: float = field(init=False)
    kappa_hat: float = field(init=False)
    warnings: tuple = field(default=(), compare=False)

    def __post_init__(self):
        lh = self.L * self.h
        object.__setattr__(self, "alpha_star", (1 + lh) * self.rho / 2)
        if self.kappa_override is not None:
            kappa = float(self.kappa_override)
        else:
            kappa = (
                (2 + 2 * lh) / (1 - lh) * self.alpha_star
                + (3 + lh) / (1 - lh) * self.beta_star
                + (1 + lh) * 2 * self.rho
            )
        object.__setattr__(self, "kappa_hat", kappa)

    @property
    def h_star(self) -> float:
        return 1 / (4 * self.L)

    @property
    def beta_bound(self) -> float:
        lh = self.L * self.h
        return min((1 - 3 * lh) * self.rho, (1 - lh) * self.rho / 2)

    def echo(self) -> dict:
        return {
            "L": self.L,
            "h": self.h,
            "rho": self.rho,
            "n_steps": self.n_steps,
            "h_star": self.h_star,
            "alpha_star": self.alpha_star,
            "beta_star": self.beta_star,
            "beta_bound": self.beta_bound,
            "kappa_hat": self.kappa_hat,
            "kappa_override": self.kappa_override,
            "warnings": list(self.warnings),
        }


def validate(L: float, h: float, rho: float, beta_star: float = 0.0, n_steps: int = 0, kappa_override=None) -> SchemeParams:
    """Check the admissible parameter regime and derive alpha*, kappa_hat."""
    if not (L > 0 and math.isfinite(L)):
        raise ParameterError(f"Lipschitz constant must be positive and finite, got {L} (use a floor such as {LIPSCHITZ_FLOOR})")
    if not h > 0:
        raise ParameterError(f"step size must be positive, got {h}")
    if not rho > 0:
        raise ParameterError(f"grid spacing must be positive, got {rho}")
    if n_steps < 0:
        raise ParameterError("n_steps must be >= 0")
    h_star = 1 / (4 * L)
    if h > h_star:
        raise ParameterError(f"h={h} exceeds h* = {h_star:g} = 1/(4L) for L={L}")
    probe = SchemeParams(L, h, rho, beta_star, n_steps, kappa_override)
    if not (0 <= beta_star < probe.beta_bound):
        raise ParameterError(f"beta*={beta_star} outside the admissible interval [0, {probe.beta_bound:g})")
    if kappa_override is not None and kappa_override < 0:
        raise ParameterError("kappa override must be >= 0")
    notes = []
    if h > 0.95 * h_star:
        msg = f"h={h} is within 5% of h*={h_star:g}"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    return SchemeParams(L, h, rho, beta_star, n_steps, kappa_override, warnings=tuple(notes))


@dataclass(frozen=True)
class FullState:
    cells: GridSet
    step_index: int = 0


def _initial_cells(x0, params: SchemeParams, dim: int | None = None) -> GridSet:
    if isinstance(x0, GridSet):
        if x0.spacing != params.rho:
            raise ParameterError(f"initial cells use spacing {x0.spacing}, scheme uses {params.rho}")
        cells = x0
    else:
        bodies = [x0] if isinstance(x0, ConvexBody) or not isinstance(x0, (list, tuple)) else list(x0)
        bodies = [as_body(b) for b in bodies]
        cells = union_all((rasterize(b, params.alpha_star, params.rho) for b in bodies), bodies[0].dim, params.rho)
    if not cells:
        raise SchemeError("empty initial set")
    return cells


def init_full(x0, params: SchemeParams) -> FullState:
    """B_alpha*(X0) on the grid, or an explicit GridSet verbatim.

    ``x0`` may be a convex body or a list of bodies whose union is X0.
    """
    return FullState(_initial_cells(x0, params), 0)


def init_boundary(x0, params: SchemeParams, strict: bool = True) -> BoundaryState:
    cells = _initial_cells(x0, params)
    if not is_chain_connected(cells):
        if strict:
            raise ConnectivityError("initial set not chain-connected")
        warnings.warn("initial set not chain-connected; boundary scheme results are not guaranteed", stacklevel=2)
    layers = extract_layers(cells, 0, 1)
    return BoundaryState(layers[0], layers[1], 0)


def step_full(state: FullState, rhs: InclusionRHS, params: SchemeParams, t: float, workers: int = 1) -> FullState:
    cells = batch_images(rhs, t, state.cells, params.h, params.alpha_star, params.rho, workers)
    return FullState(cells, state.step_index + 1)


def _finish(s0: GridSet, s1: GridSet, step: int) -> BoundaryState:
    outer = adjacent_filter(s1 - s0, s0)
    boundary = adjacent_filter(s0, outer)
    if not boundary:
        raise SchemeError(f"boundary collapsed at step {step}: set fell below grid resolution")
    return BoundaryState(boundary, outer, step)


def step_boundary_preliminary(state: BoundaryState, rhs, params: SchemeParams, t: float, workers: int = 1) -> BoundaryState:
    a, h, rho = params.alpha_star, params.h, params.rho
    inner, outer2 = derive_adjacent_layers(state.boundary, state.outer)
    s0 = batch_images(rhs, t, state.boundary, h, a, rho, workers) | batch_hollow(rhs, t, inner, h, a, a, rho, workers)
    s1 = batch_hollow(rhs, t, state.outer | outer2, h, a, a, rho, workers)
    return _finish(s0, s1, state.step_index + 1)


def step_boundary(state: BoundaryState, rhs, params: SchemeParams, t: float, workers: int = 1, pooled: bool = False) -> BoundaryState:
    """One step of the final boundary scheme.

    By default each boundary cell's image is cut by that same cell's
    kappa-band; ``pooled=True`` intersects the union of all images with the
    union of all bands instead.
    """
    a, h, rho, kappa = params.alpha_star, params.h, params.rho, params.kappa_hat
    inner, outer2 = derive_adjacent_layers(state.boundary, state.outer)
    if pooled:
        s00 = batch_images(rhs, t, state.boundary, h, a, rho, workers) & batch_hollow(
            rhs, t, state.boundary, h, a + kappa, a + kappa, rho, workers
        )
    else:
        s00 = batch_hollow(rhs, t, state.boundary, h, a, a + kappa, rho, workers)
    s0 = s00 | batch_hollow(rhs, t, inner, h, a, a, rho, workers)
    s1 = batch_hollow(rhs, t, state.outer | outer2, h, a, a, rho, workers)
    return _finish(s0, s1, state.step_index + 1)


def source_count(state) -> int:
    """Number of source cells whose images one step of the scheme evaluates."""
    if isinstance(state, FullState):
        return len(state.cells)
    inner, outer2 = derive_adjacent_layers(state.boundary, state.outer)
    return len(state.boundary) + len(inner) + len(state.outer) + len(outer2)


@dataclass
class StepRecord:
    index: int
    t: float
    boundary_cells: int
    outer_cells: int
    full_cells: int | None
    wall_ms: float
    components: int | None
    sources: int


@dataclass
class RunReport:
    variant: str
    params: dict
    steps: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    states: list = field(default_factory=list, repr=False)

    @property
    def final_state(self):
        return self.states[-1] if self.states else None

    @property
    def total_sources(self) -> int:
        return sum(s.sources for s in self.steps[1:])

    @property
    def total_wall_ms(self) -> float:
        return sum(s.wall_ms for s in self.steps[1:])

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "params": self.params,
            "metadata": self.metadata,
            "steps": [asdict(s) for s in self.steps],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _layers_of(state):
    if isinstance(state, FullState):
        lay = extract_layers(state.cells, 0, 1)
        return lay[0], lay[1]
    return state.boundary, state.outer


def run(
    variant: str,
    rhs: InclusionRHS,
    x0,
    params: SchemeParams,
    *,
    strict: bool = True,
    emit: Callable | None = None,
    workers: int | None = None,
    keep_states: bool = True,
    count_components: bool = True,
    pooled: bool = False,
    t0: float = 0.0,
) -> RunReport:
    """Iterate one scheme variant for ``params.n_steps`` steps.

    ``emit(index, t, state)`` is called for the initial state and after
    every step.  Wall times exclude the callback and the bookkeeping.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    workers = default_workers() if workers is None else workers
    report = RunReport(variant, params.echo())
    report.metadata["kappa_interpretation"] = KAPPA_NOTE if params.kappa_override is None else "override"
    report.metadata["pooled_intersection"] = pooled
    report.metadata["lipschitz"] = params.L

    start = time.perf_counter()
    if variant == "full":
        state = init_full(x0, params)
        report.metadata["initial_chain_connected"] = is_chain_connected(state.cells)
    else:
        full0 = _initial_cells(x0, params)
        report.metadata["initial_chain_connected"] = is_chain_connected(full0)
        state = init_boundary(full0, params, strict=strict)
    wall = (time.perf_counter() - start) * 1e3

    def record(state, t, wall, sources):
        b0, b1 = _layers_of(state)
        full = len(state.cells) if isinstance(state, FullState) else None
        comps = len(connected_components(b0)) if count_components else None
        report.steps.append(StepRecord(state.step_index, t, len(b0), len(b1), full, wall, comps, sources))
        if keep_states:
            report.states.append(state)
        if emit is not None:
            emit(state.step_index, t, state)

    record(state, t0, wall, 0)
    for n in range(params.n_steps):
        t = t0 + n * params.h
        sources = source_count(state)
        start = time.perf_counter()
        try:
            if variant == "full":
                state = step_full(state, rhs, params, t, workers)
            elif variant == "preliminary":
                state = step_boundary_preliminary(state, rhs, params, t, workers)
            else:
                state = step_boundary(state, rhs, params, t, workers, pooled=pooled)
        except SchemeError as exc:
            raise SchemeError(f"step {n + 1}: {exc}") from exc
        wall = (time.perf_counter() - start) * 1e3
        record(state, t0 + (n + 1) * params.h, wall, sources)
    return report
