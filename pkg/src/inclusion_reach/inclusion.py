"""Right-hand sides F(t, x) = f(t, x) + U and the set-valued Euler map.

The Euler image of a point is the disturbance body scaled by ``h`` and
carried to ``x + h f(t, x)``.  The batch helpers at the bottom rasterize the
images of many source cells at once; for box disturbances every image is a
box, so unions reduce to unions of integer index boxes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import exprparser
from .geometry import (
    Box,
    ConvexBody,
    as_body,
    box_index_range,
    box_strict_index_range,
    contains,
    rasterize,
    rasterize_boundary,
)
from .grid import GridSet, union_all, union_of_index_boxes

__all__ = [
    "InclusionRHS",
    "LipschitzEstimate",
    "IterationError",
    "euler_image",
    "image_cells",
    "boundary_cells",
    "band_cells",
    "estimate_lipschitz",
    "inverse_image_point",
    "batch_images",
    "batch_hollow",
]

BUILTIN_DRIFTS = {
    "identity": lambda t, x: np.array(x, dtype=float, copy=True),
    "zero": lambda t, x: np.zeros_like(x, dtype=float),
}


class IterationError(RuntimeError):
    pass


@dataclass(frozen=True)
class InclusionRHS:
    """F(t, x) = f(t, x) + U with U a convex body containing the origin.

    ``drift`` is a list of expression sources (one per component), a list of
    parsed ASTs, a built-in tag (``"identity"``, ``"zero"``) or a callable
    ``f(t, X)`` vectorized over the rows of X.
    """

    dim: int
    drift: object
    disturbance: object
    lipschitz: float | None = None
    name: str = ""
    _fn: Callable = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        body = as_body(self.disturbance)
        if body.dim != self.dim:
            raise ValueError("disturbance dimension does not match")
        if not contains(body, np.zeros(self.dim), tol=1e-12):
            raise ValueError("disturbance must contain the origin")
        object.__setattr__(self, "disturbance", body)
        object.__setattr__(self, "_fn", self._compile(self.drift))
        if self.lipschitz is not None and self.lipschitz < 0:
            raise ValueError("Lipschitz constant must be non-negative")

    def _compile(self, drift) -> Callable:
        if callable(drift):
            return drift
        if isinstance(drift, str):
            if drift not in BUILTIN_DRIFTS:
                raise ValueError(f"unknown built-in drift {drift!r}")
            return BUILTIN_DRIFTS[drift]
        comps = list(drift)
        if len(comps) != self.dim:
            raise ValueError(f"need {self.dim} drift components, got {len(comps)}")
        asts = [exprparser.parse(c, self.dim) if isinstance(c, str) else c for c in comps]
        object.__setattr__(self, "drift", tuple(comps))

        def fn(t, x):
            return np.stack([exprparser.evaluate(a, x, t) for a in asts], axis=-1)

        return fn

    @property
    def is_box(self) -> bool:
        return self.disturbance.is_box

    def f(self, t: float, x) -> np.ndarray:
        """Drift at a point (shape (d,)) or at rows of an (n, d) array."""
        x = np.asarray(x, dtype=float)
        try:
            out = np.asarray(self._fn(t, x), dtype=float)
        except exprparser.EvalError as exc:
            rows = np.atleast_2d(x)
            for row in rows:
                try:
                    self._fn(t, row)
                except exprparser.EvalError:
                    raise exprparser.EvalError(f"{exc} (t={t}, x={row.tolist()})") from exc
            raise
        if not np.all(np.isfinite(out)):
            raise exprparser.EvalError(f"non-finite drift value at t={t}")
        return out


def euler_image(rhs: InclusionRHS, t: float, x, h: float) -> ConvexBody:
    """x + h F(t, x)."""
    if not h > 0:
        raise ValueError("step size must be positive")
    x = np.asarray(x, dtype=float)
    w = rhs.disturbance.world()
    return ConvexBody(w, translation=x + h * rhs.f(t, x), scale=h)


def _check_alpha(alpha: float, rho: float) -> None:
    if alpha < rho / 2:
        warnings.warn(f"blowup {alpha} below rho/2 = {rho / 2}; images may miss the grid", stacklevel=3)


def image_cells(rhs, t, x, h, alpha, rho) -> GridSet:
    """Grid cells of the alpha-blowup of the Euler image of grid cell ``x``."""
    _check_alpha(alpha, rho)
    return rasterize(euler_image(rhs, t, np.asarray(x) * rho, h), alpha, rho)


def boundary_cells(rhs, t, x, h, alpha, rho) -> GridSet:
    _check_alpha(alpha, rho)
    return rasterize_boundary(euler_image(rhs, t, np.asarray(x) * rho, h), alpha, rho)


def band_cells(rhs, t, x, h, alpha, kappa, rho) -> GridSet:
    """Cells within alpha + kappa of the boundary of the Euler image."""
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    return boundary_cells(rhs, t, x, h, alpha + kappa, rho)


@dataclass(frozen=True)
class LipschitzEstimate:
    raw: float
    value: float
    certified: bool = False


def estimate_lipschitz(rhs: InclusionRHS, domain: Box, samples_per_axis: int = 21, t: float = 0.0) -> LipschitzEstimate:
    """Sampled bound on the max-norm Lipschitz constant of the drift.

    Central differences on a regular grid; the reported value carries a
    safety factor of 1.1 and is never certified.
    """
    if samples_per_axis < 2:
        raise ValueError("need at least two samples per axis")
    axes = [np.linspace(a, b, samples_per_axis) for a, b in zip(domain.lo, domain.hi)]
    pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    steps = (domain.hi - domain.lo) / (10 * samples_per_axis)
    jac_rows = np.zeros((len(pts), rhs.dim))
    for k in range(rhs.dim):
        e = np.zeros(rhs.dim)
        e[k] = steps[k]
        col = (rhs.f(t, pts + e) - rhs.f(t, pts - e)) / (2 * steps[k])
        jac_rows += np.abs(col)
    raw = float(jac_rows.max(axis=1).max())
    return LipschitzEstimate(raw=raw, value=1.1 * raw)


def inverse_image_point(rhs, t, h, x0, y_hat, tol=1e-12, *, return_history=False):
    """Find x with y_hat in x + h F(t, x), starting from x0.

    Fixed-point iteration: project y_hat - x onto h F(t, x), move x by the
    residual.  Needs a box disturbance and L h < 1; the residuals shrink by a
    factor of at least L h per step.
    """
    if not rhs.is_box:
        raise ValueError("inverse iteration needs a box disturbance")
    if tol <= 0:
        raise ValueError("tol must be positive")
    L = rhs.lipschitz
    if L is None or L * h >= 1:
        raise ValueError(f"need a declared Lipschitz constant with L*h < 1 (L={L}, h={h})")
    w = rhs.disturbance.world()
    x = np.asarray(x0, dtype=float).copy()
    y = np.asarray(y_hat, dtype=float)

    def residual(x):
        shift = h * rhs.f(t, x)
        g = np.clip(y - x, shift + h * w.lo, shift + h * w.hi)
        return y - (x + g)

    r = residual(x)
    history = [float(np.max(np.abs(r)))]
    if history[0] <= tol:
        return (x, history) if return_history else x
    lh = L * h
    cap = 50 if lh == 0 else math.ceil(math.log(tol / history[0]) / math.log(lh)) + 50
    for _ in range(cap):
        x = x + r
        r = residual(x)
        history.append(float(np.max(np.abs(r))))
        if history[-1] <= tol:
            return (x, history) if return_history else x
    raise IterationError(f"no convergence after {cap} iterations (residual {history[-1]:.3e}); L may be too small")


# -- batch rasterization over many source cells ---------------------------------


def _image_boxes(rhs: InclusionRHS, t: float, cells: GridSet, h: float):
    """World bounds of the Euler images of all cells (box disturbances only)."""
    x = cells.points
    w = rhs.disturbance.world()
    center = x + h * rhs.f(t, x)
    # same arithmetic as ConvexBody.world so batch and single-cell paths agree bitwise
    return center + h * w.lo, center + h * w.hi


def _hollow_slabs(olo, ohi, ilo, ihi):
    """Split each box [olo, ohi] minus [ilo, ihi] into disjoint boxes."""
    n, d = olo.shape
    has_hole = np.all(ilo <= ihi, axis=1)
    parts_lo, parts_hi = [olo[~has_hole]], [ohi[~has_hole]]
    olo, ohi, ilo, ihi = olo[has_hole], ohi[has_hole], ilo[has_hole], ihi[has_hole]
    ilo = np.maximum(ilo, olo)
    ihi = np.minimum(ihi, ohi)
    for k in range(d):
        lo_lo, lo_hi = olo.copy(), ohi.copy()
        lo_lo[:, :k], lo_hi[:, :k] = ilo[:, :k], ihi[:, :k]
        hi_lo, hi_hi = lo_lo.copy(), lo_hi.copy()
        lo_hi[:, k] = ilo[:, k] - 1
        hi_lo[:, k] = ihi[:, k] + 1
        parts_lo += [lo_lo, hi_lo]
        parts_hi += [lo_hi, hi_hi]
    return np.concatenate(parts_lo), np.concatenate(parts_hi)


def _slow_union(rhs, t, cells, h, fn) -> GridSet:
    return union_all((fn(euler_image(rhs, t, p, h)) for p in cells.points), cells.dim, cells.spacing)


def batch_images(rhs, t, cells: GridSet, h, alpha, rho, workers: int = 1) -> GridSet:
    """Union over source cells of ``image_cells``."""
    if not cells:
        return cells
    if not rhs.is_box:
        return _slow_union(rhs, t, cells, h, lambda b: rasterize(b, alpha, rho))
    lo, hi = _image_boxes(rhs, t, cells, h)
    ilo, ihi = box_index_range(lo - alpha, hi + alpha, 0.0, rho)
    return union_of_index_boxes(cells.dim, rho, ilo, ihi, workers)


def batch_hollow(rhs, t, cells: GridSet, h, alpha_outer, alpha_inner, rho, workers: int = 1) -> GridSet:
    """Union over source cells of the cells of B_{alpha_outer}(image) that are not
    strictly inside the erosion of the image by ``alpha_inner``.

    ``alpha_outer == alpha_inner`` gives ``boundary_cells``; ``alpha_inner =
    alpha + kappa`` with ``alpha_outer = alpha`` gives the per-cell
    intersection of ``image_cells`` with ``band_cells``.
    """
    if not cells:
        return cells
    if alpha_inner < alpha_outer:
        raise ValueError("alpha_inner must be >= alpha_outer")
    if not rhs.is_box:

        def one(body):
            outer = rasterize(body, alpha_outer, rho)
            return outer & rasterize_boundary(body, alpha_inner, rho)

        return _slow_union(rhs, t, cells, h, one)
    lo, hi = _image_boxes(rhs, t, cells, h)
    olo, ohi = box_index_range(lo - alpha_outer, hi + alpha_outer, 0.0, rho)
    bad = np.any(lo + alpha_inner > hi - alpha_inner, axis=1)
    slo, shi = box_strict_index_range(lo + alpha_inner, hi - alpha_inner, 0.0, rho)
    # an eroded box that is empty leaves nothing strictly inside
    slo[bad], shi[bad] = 1, 0
    blo, bhi = _hollow_slabs(olo, ohi, slo, shi)
    return union_of_index_boxes(cells.dim, rho, blo, bhi, workers)
