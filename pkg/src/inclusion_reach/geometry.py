"""Convex bodies in the max-norm: boxes and H-polytopes.

All balls are closed.  Grid membership tests carry a relative slack of
``REL_EPS`` on world coordinates so that points lying exactly on a face are
classified the same way everywhere (tie goes to "on the body", and for the
boundary band tie goes to "in the band").
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .grid import GridSet, encode

__all__ = [
    "REL_EPS",
    "Box",
    "HPolytope",
    "ConvexBody",
    "as_body",
    "inflate",
    "erode",
    "contains",
    "dist_boundary",
    "rasterize",
    "rasterize_boundary",
    "box_index_range",
    "box_strict_index_range",
]

REL_EPS = 1e-12


def _slack(v):
    return REL_EPS * np.maximum(1.0, np.abs(v))


def box_index_range(lo, hi, alpha: float, rho: float):
    """Inclusive index range of grid points in the closed box [lo - alpha, hi + alpha].

    Works elementwise on arrays of any matching shape.
    """
    a = np.asarray(lo, dtype=float) - alpha
    b = np.asarray(hi, dtype=float) + alpha
    ilo = np.ceil((a - _slack(a)) / rho).astype(np.int64)
    ihi = np.floor((b + _slack(b)) / rho).astype(np.int64)
    return ilo, ihi


def box_strict_index_range(lo, hi, alpha: float, rho: float):
    """Inclusive index range of grid points strictly inside [lo + alpha, hi - alpha].

    Points within the tie slack of a face count as not strictly inside.
    """
    a = np.asarray(lo, dtype=float) + alpha
    b = np.asarray(hi, dtype=float) - alpha
    ilo = np.floor((a + _slack(a)) / rho).astype(np.int64) + 1
    ihi = np.ceil((b - _slack(b)) / rho).astype(np.int64) - 1
    return ilo, ihi


@dataclass(frozen=True, eq=False)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lo and hi must be vectors of equal length")
        if np.any(lo > hi):
            raise ValueError(f"box bounds inverted: lo={lo}, hi={hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def centered(cls, center, radius: float) -> Box:
        c = np.atleast_1d(np.asarray(center, dtype=float))
        return cls(c - radius, c + radius)

    @classmethod
    def point(cls, p) -> Box:
        return cls(p, p)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


@dataclass(frozen=True, eq=False)
class HPolytope:
    """{x : normals @ x <= offsets} intersected with the certified box ``bbox``."""

    normals: np.ndarray
    offsets: np.ndarray
    bbox: Box

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.normals, dtype=float)).copy()
        b = np.atleast_1d(np.asarray(self.offsets, dtype=float)).copy()
        if a.shape[0] != b.shape[0] or a.shape[1] != self.bbox.dim:
            raise ValueError("normals must be (m, d) with m offsets and d = bbox.dim")
        if np.any(np.abs(a).sum(axis=1) == 0):
            raise ValueError("zero normal vector")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "normals", a)
        object.__setattr__(self, "offsets", b)

    @property
    def dim(self) -> int:
        return self.bbox.dim

    @property
    def norms1(self) -> np.ndarray:
        return np.abs(self.normals).sum(axis=1)

    def has_interior(self) -> bool:
        """Whether some max-norm ball of positive radius fits inside."""
        from scipy.optimize import linprog

        d = self.dim
        a = np.vstack([self.normals, np.eye(d), -np.eye(d)])
        b = np.concatenate([self.offsets, self.bbox.hi, -self.bbox.lo])
        n1 = np.abs(a).sum(axis=1)
        res = linprog(
            c=np.r_[np.zeros(d), -1.0],
            A_ub=np.hstack([a, n1[:, None]]),
            b_ub=b,
            bounds=[(None, None)] * d + [(None, 1e9)],
        )
        return bool(res.status == 0 and -res.fun > 1e-12)

    def __repr__(self):
        return f"HPolytope(m={len(self.offsets)}, bbox={self.bbox!r})"


Shape = Union[Box, HPolytope]


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """``translation + scale * shape``."""

    shape: Shape
    translation: np.ndarray = None
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        t = self.translation
        t = np.zeros(self.shape.dim) if t is None else np.atleast_1d(np.asarray(t, dtype=float)).copy()
        if t.shape != (self.shape.dim,):
            raise ValueError("translation has wrong dimension")
        t.setflags(write=False)
        object.__setattr__(self, "translation", t)

    @property
    def dim(self) -> int:
        return self.shape.dim

    @property
    def is_box(self) -> bool:
        return isinstance(self.shape, Box)

    def world(self) -> Shape:
        """The body with its affine carrier applied."""
        t, s, p = self.translation, self.scale, self.shape
        if isinstance(p, Box):
            return Box(t + s * p.lo, t + s * p.hi)
        return HPolytope(p.normals, s * p.offsets + p.normals @ t, Box(t + s * p.bbox.lo, t + s * p.bbox.hi))

    def bounding_box(self) -> Box:
        w = self.world()
        return w if isinstance(w, Box) else w.bbox


def as_body(p) -> ConvexBody:
    if isinstance(p, ConvexBody):
        return p
    if isinstance(p, (Box, HPolytope)):
        return ConvexBody(p)
    raise TypeError(f"not a convex body: {p!r}")


def inflate(p, alpha: float) -> ConvexBody:
    """Minkowski sum with the closed max-norm ball of radius ``alpha``."""
    if alpha < 0:
        raise ValueError(f"inflation radius must be >= 0, got {alpha}")
    body = as_body(p)
    if alpha == 0:
        return body
    w = body.world()
    if isinstance(w, Box):
        return ConvexBody(Box(w.lo - alpha, w.hi + alpha))
    bb = Box(w.bbox.lo - alpha, w.bbox.hi + alpha)
    return ConvexBody(HPolytope(w.normals, w.offsets + alpha * w.norms1, bb))


def erode(p, alpha: float) -> ConvexBody | None:
    """{x : B_alpha(x) inside p}; ``None`` when that is visibly empty."""
    if alpha < 0:
        raise ValueError(f"erosion radius must be >= 0, got {alpha}")
    body = as_body(p)
    if alpha == 0:
        return body
    w = body.world()
    bb = w if isinstance(w, Box) else w.bbox
    lo, hi = bb.lo + alpha, bb.hi - alpha
    if np.any(lo > hi + _slack(hi)):
        return None
    # faces that cross only by rounding meet in the middle
    mid = 0.5 * (lo + hi)
    lo, hi = np.minimum(lo, mid), np.maximum(hi, mid)
    if isinstance(w, Box):
        return ConvexBody(Box(lo, hi))
    return ConvexBody(HPolytope(w.normals, w.offsets - alpha * w.norms1, Box(lo, hi)))


def contains(p, x, tol: float = 0.0) -> bool:
    if tol < 0:
        raise ValueError("tol must be >= 0")
    w = as_body(p).world()
    x = np.asarray(x, dtype=float)
    bb = w if isinstance(w, Box) else w.bbox
    if np.any(x < bb.lo - tol) or np.any(x > bb.hi + tol):
        return False
    if isinstance(w, Box):
        return True
    return bool(np.all(w.normals @ x <= w.offsets + tol * w.norms1))


def _inscribed_radius(w: Shape, x: np.ndarray) -> float:
    bb = w if isinstance(w, Box) else w.bbox
    r = float(np.min(np.minimum(x - bb.lo, bb.hi - x)))
    if isinstance(w, HPolytope):
        r = min(r, float(np.min((w.offsets - w.normals @ x) / w.norms1)))
    return r


def dist_boundary(p, x, tol: float = 1e-9) -> float:
    """Max-norm distance from ``x`` to the boundary of ``p``.

    Exterior distances of polytopes come from bisection on the inflation
    radius, accurate to ``tol``.
    """
    body = as_body(p)
    w = body.world()
    x = np.asarray(x, dtype=float)
    if contains(w, x):
        return max(_inscribed_radius(w, x), 0.0)
    if isinstance(w, Box):
        return float(np.max(np.maximum(w.lo - x, x - w.hi)))
    # the bbox distance is a lower bound; it is negative for points inside the bbox
    lo = max(float(np.max(np.maximum(w.bbox.lo - x, x - w.bbox.hi))), 0.0)
    hi = max(lo, tol)
    while not contains(inflate(w, hi), x):
        lo, hi = hi, 2 * hi + tol
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if contains(inflate(w, mid), x):
            hi = mid
        else:
            lo = mid
    return hi


def _bbox_cells(lo_idx, hi_idx) -> np.ndarray:
    axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo_idx, hi_idx)]
    if any(len(ax) == 0 for ax in axes):
        return np.empty((0, len(axes)), dtype=np.int64)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _check_bounded(w: Shape) -> None:
    bb = w if isinstance(w, Box) else w.bbox
    if not (np.all(np.isfinite(bb.lo)) and np.all(np.isfinite(bb.hi))):
        raise ValueError("cannot rasterize an unbounded body")


def _polytope_mask(w: HPolytope, pts: np.ndarray, strict: bool) -> np.ndarray:
    """Membership of world points in the half-spaces of ``w`` (bbox handled by the caller)."""
    lhs = pts @ w.normals.T
    sl = _slack(w.offsets) * np.maximum(1.0, w.norms1)
    if strict:
        return np.all(lhs < w.offsets - sl, axis=1)
    return np.all(lhs <= w.offsets + sl, axis=1)


def rasterize(p, alpha: float, rho: float) -> GridSet:
    """Grid points of spacing ``rho`` inside the closed alpha-blowup of ``p``."""
    if alpha < 0 or not rho > 0:
        raise ValueError("need alpha >= 0 and rho > 0")
    w = inflate(p, alpha).world()
    _check_bounded(w)
    bb = w if isinstance(w, Box) else w.bbox
    ilo, ihi = box_index_range(bb.lo, bb.hi, 0.0, rho)
    cells = _bbox_cells(ilo, ihi)
    if isinstance(w, HPolytope) and len(cells):
        cells = cells[_polytope_mask(w, cells * rho, strict=False)]
    return GridSet.from_keys(w.dim, rho, encode(cells, w.dim))


def rasterize_boundary(p, alpha: float, rho: float) -> GridSet:
    """Grid points within max-distance ``alpha`` of the boundary of ``p``.

    For compact convex p this is B_alpha(p) minus the open interior of the
    erosion of p by alpha.
    """
    full = rasterize(p, alpha, rho)
    inner = erode(p, alpha)
    if inner is None or not full:
        return full
    w = inner.world()
    bb = w if isinstance(w, Box) else w.bbox
    idx = full.indices
    slo, shi = box_strict_index_range(bb.lo, bb.hi, 0.0, rho)
    strict = np.all((idx >= slo) & (idx <= shi), axis=1)
    if isinstance(w, HPolytope) and strict.any():
        strict[strict] = _polytope_mask(w, idx[strict] * rho, strict=True)
    return GridSet.from_keys(full.dim, rho, full.keys[~strict], presorted=True)
