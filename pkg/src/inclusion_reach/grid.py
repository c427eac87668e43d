"""Sparse sets of lattice cells on the grid rho * Z^d.

Cells are stored as packed int64 keys, one signed coordinate per bit field,
kept sorted and unique.  Sorting packed keys is the same as sorting the index
tuples lexicographically, so every output of this module has a deterministic
order.  Set operations are exact integer comparisons; ``spacing`` only enters
when converting to world coordinates.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc_labels
from scipy.spatial import cKDTree

__all__ = [
    "GridSet",
    "BoundaryState",
    "union_of_index_boxes",
    "Layers",
    "neighbors",
    "neighbor_offsets",
    "dilate",
    "extract_layers",
    "derive_adjacent_layers",
    "is_chain_connected",
    "connected_components",
    "hausdorff",
    "adjacent_filter",
    "union_all",
    "write_csv",
    "read_csv",
]


@lru_cache(maxsize=None)
def _layout(dim: int) -> tuple[int, int]:
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    bits = min(63 // dim, 32)
    return bits, 1 << (bits - 1)


def encode(indices: np.ndarray, dim: int) -> np.ndarray:
    """Pack an (n, dim) integer array into int64 keys."""
    bits, off = _layout(dim)
    idx = np.asarray(indices, dtype=np.int64).reshape(-1, dim)
    if idx.size and (idx.min() < -off or idx.max() >= off):
        raise OverflowError(f"lattice index out of range +-{off} for d={dim}")
    keys = np.zeros(len(idx), dtype=np.int64)
    for k in range(dim):
        keys <<= bits
        keys |= idx[:, k] + off
    return keys


def decode(keys: np.ndarray, dim: int) -> np.ndarray:
    bits, off = _layout(dim)
    keys = np.asarray(keys, dtype=np.int64)
    out = np.empty((len(keys), dim), dtype=np.int64)
    mask = (1 << bits) - 1
    k = keys.copy()
    for j in range(dim - 1, -1, -1):
        out[:, j] = (k & mask) - off
        k >>= bits
    return out


def offset_key(delta: Sequence[int], dim: int) -> int:
    """Key increment that shifts a cell by ``delta`` (valid away from the range limits)."""
    bits, _ = _layout(dim)
    key = 0
    for k in range(dim):
        key = (key << bits) + int(delta[k])
    return key


@lru_cache(maxsize=None)
def neighbor_offsets(dim: int) -> np.ndarray:
    """The 3^d - 1 unit Chebyshev offsets, lexicographically ordered."""
    offs = [d for d in itertools.product((-1, 0, 1), repeat=dim) if any(d)]
    arr = np.array(offs, dtype=np.int64).reshape(-1, dim)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def _neighbor_key_offsets(dim: int) -> np.ndarray:
    arr = np.array([offset_key(d, dim) for d in neighbor_offsets(dim)], dtype=np.int64)
    arr.setflags(write=False)
    return arr


def _member(sorted_keys: np.ndarray, query: np.ndarray) -> np.ndarray:
    if len(sorted_keys) == 0:
        return np.zeros(len(query), dtype=bool)
    pos = np.searchsorted(sorted_keys, query)
    pos[pos == len(sorted_keys)] = 0
    return sorted_keys[pos] == query


class GridSet:
    """Immutable finite subset of the lattice ``spacing * Z^dim``."""

    __slots__ = ("dim", "spacing", "_keys")

    def __init__(self, dim: int, spacing: float, cells: Iterable | np.ndarray = ()):
        _layout(dim)
        spacing = float(spacing)
        if not spacing > 0:
            raise ValueError(f"spacing must be positive, got {spacing}")
        if isinstance(cells, np.ndarray):
            arr = cells.astype(np.int64).reshape(-1, dim)
        else:
            cells = [tuple(c) for c in cells]
            if any(len(c) != dim for c in cells):
                raise ValueError(f"all cells must have dimension {dim}")
            arr = np.array(cells, dtype=np.int64).reshape(-1, dim)
        self.dim = dim
        self.spacing = spacing
        self._keys = np.unique(encode(arr, dim))
        self._keys.setflags(write=False)

    @classmethod
    def from_keys(cls, dim: int, spacing: float, keys: np.ndarray, *, presorted: bool = False) -> GridSet:
        obj = cls.__new__(cls)
        obj.dim = dim
        obj.spacing = float(spacing)
        keys = np.asarray(keys, dtype=np.int64)
        obj._keys = keys if presorted else np.unique(keys)
        obj._keys.setflags(write=False)
        return obj

    @classmethod
    def empty(cls, dim: int, spacing: float) -> GridSet:
        return cls.from_keys(dim, spacing, np.empty(0, dtype=np.int64), presorted=True)

    @property
    def keys(self) -> np.ndarray:
        return self._keys

    @property
    def indices(self) -> np.ndarray:
        """(n, dim) integer index array in lexicographic order."""
        return decode(self._keys, self.dim)

    @property
    def points(self) -> np.ndarray:
        return self.indices * self.spacing

    def __len__(self) -> int:
        return len(self._keys)

    def __bool__(self) -> bool:
        return len(self._keys) > 0

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        for row in self.indices:
            yield tuple(int(v) for v in row)

    def __contains__(self, cell) -> bool:
        cell = tuple(cell)
        if len(cell) != self.dim:
            return False
        key = encode(np.array([cell]), self.dim)
        return bool(_member(self._keys, key)[0])

    def contains_keys(self, keys: np.ndarray) -> np.ndarray:
        return _member(self._keys, np.asarray(keys, dtype=np.int64))

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridSet):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.spacing == other.spacing
            and np.array_equal(self._keys, other._keys)
        )

    def __hash__(self) -> int:
        return hash((self.dim, self.spacing, self._keys.tobytes()))

    def __repr__(self) -> str:
        return f"GridSet(dim={self.dim}, spacing={self.spacing!r}, n={len(self)})"

    def _check(self, other: GridSet) -> None:
        if self.dim != other.dim or self.spacing != other.spacing:
            raise ValueError(
                f"incompatible grids: (d={self.dim}, rho={self.spacing}) vs "
                f"(d={other.dim}, rho={other.spacing})"
            )

    def _new(self, keys: np.ndarray) -> GridSet:
        return GridSet.from_keys(self.dim, self.spacing, keys, presorted=True)

    def union(self, other: GridSet) -> GridSet:
        self._check(other)
        return self._new(np.union1d(self._keys, other._keys))

    def intersection(self, other: GridSet) -> GridSet:
        self._check(other)
        return self._new(np.intersect1d(self._keys, other._keys, assume_unique=True))

    def difference(self, other: GridSet) -> GridSet:
        self._check(other)
        return self._new(self._keys[~_member(other._keys, self._keys)])

    __or__ = union
    __and__ = intersection
    __sub__ = difference

    def isdisjoint(self, other: GridSet) -> bool:
        self._check(other)
        return not _member(other._keys, self._keys).any()

    def issubset(self, other: GridSet) -> bool:
        self._check(other)
        return bool(_member(other._keys, self._keys).all())

    __le__ = issubset

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        """Inclusive index bounding box (lo, hi)."""
        if not self:
            raise ValueError("empty set has no bounding box")
        idx = self.indices
        return idx.min(axis=0), idx.max(axis=0)


@dataclass(frozen=True)
class BoundaryState:
    """Discrete boundary and first exterior layer of a set at step ``step_index``."""

    boundary: GridSet
    outer: GridSet
    step_index: int = 0

    def check(self) -> None:
        """Raise ValueError unless the two layers are disjoint and mutually adjacent."""
        if not self.boundary.isdisjoint(self.outer):
            raise ValueError("boundary and outer layer intersect")
        if len(adjacent_filter(self.outer, self.boundary)) != len(self.outer):
            raise ValueError("outer layer has cells not adjacent to the boundary")


class Layers(dict):
    """Map k -> discrete layer of a set, with the discrete interior attached."""

    def __init__(self, layers: dict[int, GridSet], interior: GridSet):
        super().__init__(layers)
        self.interior = interior


def neighbors(p: Sequence[int]) -> set[tuple[int, ...]]:
    p = tuple(int(v) for v in p)
    return {tuple(a + b for a, b in zip(p, d)) for d in neighbor_offsets(len(p)).tolist()}


def _shifted_keys(keys: np.ndarray, dim: int) -> np.ndarray:
    """All neighbor keys of every cell, shape (n, 3^d - 1)."""
    return keys[:, None] + _neighbor_key_offsets(dim)[None, :]


def _has_neighbor_in(s_keys: np.ndarray, t_keys: np.ndarray, dim: int) -> np.ndarray:
    out = np.zeros(len(s_keys), dtype=bool)
    if len(t_keys) == 0:
        return out
    for off in _neighbor_key_offsets(dim):
        out |= _member(t_keys, s_keys + off)
    return out


def dilate(m: GridSet) -> GridSet:
    """Union of the neighbor sets of all cells of ``m`` (cells of ``m`` only if they are neighbors)."""
    if not m:
        return m
    return m._new(np.unique(_shifted_keys(m.keys, m.dim)))


def _inner_boundary(m: GridSet) -> GridSet:
    full = np.ones(len(m), dtype=bool)
    for off in _neighbor_key_offsets(m.dim):
        full &= _member(m.keys, m.keys + off)
    return m._new(m.keys[~full])


def extract_layers(m: GridSet, k_lo: int = -1, k_hi: int = 1) -> Layers:
    """Discrete boundary, interior shells (k < 0) and exterior shells (k > 0) of ``m``.

    Shells come from a breadth-first expansion over the king-move graph
    started at the discrete boundary; on Z^d the graph distance equals the
    Chebyshev index distance, so every shell is exact.
    """
    if k_lo > 0 or k_hi < 0:
        raise ValueError("need k_lo <= 0 <= k_hi")
    empty = GridSet.empty(m.dim, m.spacing)
    if not m:
        return Layers({k: empty for k in range(k_lo, k_hi + 1)}, empty)
    b0 = _inner_boundary(m)
    layers = {0: b0}
    seen = b0.keys
    frontier = b0.keys
    for k in range(1, max(-k_lo, k_hi) + 1):
        nxt = np.unique(_shifted_keys(frontier, m.dim))
        nxt = nxt[~_member(seen, nxt)]
        seen = np.union1d(seen, nxt)
        frontier = nxt
        inside = _member(m.keys, nxt)
        if k <= -k_lo:
            layers[-k] = m._new(nxt[inside])
        if k <= k_hi:
            layers[k] = m._new(nxt[~inside])
    return Layers({k: layers[k] for k in range(k_lo, k_hi + 1)}, m - b0)


def derive_adjacent_layers(b0: GridSet, b1: GridSet) -> tuple[GridSet, GridSet]:
    """Recover (layer -1, layer 2) from (layer 0, layer 1) of the same set.

    Any cell of the set that touches an outside cell lies in layer 0, and any
    outside cell touching layer 0 lies in layer 1.  Hence the neighbors of
    layer 0 outside both known layers are exactly layer -1, and the neighbors
    of layer 1 outside both known layers are exactly layer 2.
    """
    known = b0 | b1
    return dilate(b0) - known, dilate(b1) - known


def adjacent_filter(s: GridSet, t: GridSet) -> GridSet:
    """Cells of ``s`` outside ``t`` at Chebyshev distance exactly one from ``t``."""
    s._check(t)
    keys = s.keys[~_member(t.keys, s.keys)]
    return s._new(keys[_has_neighbor_in(keys, t.keys, s.dim)])


def _component_labels(m: GridSet) -> tuple[int, np.ndarray]:
    n = len(m)
    rows, cols = [], []
    # half of the offsets suffice for an undirected graph
    for off in _neighbor_key_offsets(m.dim)[: len(_neighbor_key_offsets(m.dim)) // 2]:
        q = m.keys + off
        hit = _member(m.keys, q)
        rows.append(np.nonzero(hit)[0])
        cols.append(np.searchsorted(m.keys, q[hit]))
    r = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    c = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
    graph = coo_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(n, n))
    return _cc_labels(graph, directed=False)


def is_chain_connected(m: GridSet) -> bool:
    if len(m) <= 1:
        return True
    ncomp, _ = _component_labels(m)
    return ncomp == 1


def connected_components(m: GridSet) -> list[GridSet]:
    """Maximal chain-connected subsets, ordered by their smallest cell."""
    if not m:
        return []
    ncomp, labels = _component_labels(m)
    # keys are sorted, so the first occurrence of a label is its smallest cell
    _, first = np.unique(labels, return_index=True)
    order = labels[np.sort(first)]
    return [m._new(m.keys[labels == lab]) for lab in order]


def hausdorff(a: GridSet, b: GridSet) -> float:
    """Symmetric Hausdorff distance in the max-norm, in world units."""
    a._check(b)
    if not a or not b:
        raise ValueError("undefined Hausdorff distance: empty operand")
    if a == b:
        return 0.0
    ia, ib = a.indices.astype(float), b.indices.astype(float)
    d_ab = cKDTree(ib).query(ia, p=np.inf)[0].max()
    d_ba = cKDTree(ia).query(ib, p=np.inf)[0].max()
    return a.spacing * float(max(d_ab, d_ba))


def union_all(sets: Iterable[GridSet], dim: int, spacing: float) -> GridSet:
    parts = [s.keys for s in sets]
    if not parts:
        return GridSet.empty(dim, spacing)
    return GridSet.from_keys(dim, spacing, np.unique(np.concatenate(parts)), presorted=True)


def write_csv(m: GridSet, path, kind: str = "full") -> None:
    if kind not in ("boundary", "outer", "full"):
        raise ValueError(f"unknown cell dump kind {kind!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# d={m.dim} rho={m.spacing!r} kind={kind}\n")
        np.savetxt(fh, m.indices, fmt="%d", delimiter=",", newline="\n")


def read_csv(path) -> tuple[GridSet, str]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing header line")
        fields = dict(item.split("=", 1) for item in header[1:].split())
        dim = int(fields["d"])
        rows = [tuple(int(v) for v in line.split(",")) for line in fh if line.strip()]
    return GridSet(dim, float(fields["rho"]), rows), fields["kind"]


# Dense painting of box unions is used when the bounding box is small
# compared to the enumerated volume; the limit caps its memory use.
DENSE_CELL_LIMIT = 30_000_000
CHUNK_CELLS = 4_000_000


def _paint_boxes(ilo: np.ndarray, ihi: np.ndarray, dim: int) -> np.ndarray:
    base = ilo.min(axis=0)
    ext = ihi.max(axis=0) - base + 1
    shape = tuple(int(e) + 1 for e in ext)
    flat_idx, weights = [], []
    for corner in itertools.product((0, 1), repeat=dim):
        sel = np.array(corner, dtype=bool)
        pt = np.where(sel, ihi + 1, ilo) - base
        flat_idx.append(np.ravel_multi_index(pt.T, shape))
        weights.append(np.full(len(ilo), -1 if sel.sum() % 2 else 1, dtype=np.int32))
    diff = np.bincount(
        np.concatenate(flat_idx), weights=np.concatenate(weights), minlength=int(np.prod(shape))
    ).astype(np.int32).reshape(shape)
    for ax in range(dim):
        np.cumsum(diff, axis=ax, out=diff)
    inside = diff[tuple(slice(0, int(e)) for e in ext)] > 0
    cells = np.stack(np.nonzero(inside), axis=1) + base
    return encode(cells, dim)


def _enumerate_boxes(ilo: np.ndarray, ihi: np.ndarray, dim: int) -> np.ndarray:
    width = (ihi - ilo + 1).max(axis=0)
    grids = np.meshgrid(*[np.arange(w, dtype=np.int64) for w in width], indexing="ij")
    offs = np.stack([g.ravel() for g in grids], axis=1)
    cells = ilo[:, None, :] + offs[None, :, :]
    ok = np.all(cells <= ihi[:, None, :], axis=2)
    return np.unique(encode(cells[ok], dim))


def union_of_index_boxes(
    dim: int, spacing: float, ilo: np.ndarray, ihi: np.ndarray, workers: int = 1
) -> GridSet:
    """Union of the inclusive integer boxes ``[ilo[i], ihi[i]]``.

    Independent of ``workers`` and of the box order: every path ends in a
    sorted unique key array.
    """
    ilo = np.asarray(ilo, dtype=np.int64).reshape(-1, dim)
    ihi = np.asarray(ihi, dtype=np.int64).reshape(-1, dim)
    keep = np.all(ilo <= ihi, axis=1)
    ilo, ihi = ilo[keep], ihi[keep]
    if len(ilo) == 0:
        return GridSet.empty(dim, spacing)
    vol = int(np.prod(ihi - ilo + 1, axis=1).sum())
    bbox_vol = int(np.prod(ihi.max(axis=0) - ilo.min(axis=0) + 2))
    if bbox_vol <= DENSE_CELL_LIMIT and bbox_vol <= 4 * vol:
        return GridSet.from_keys(dim, spacing, _paint_boxes(ilo, ihi, dim), presorted=True)
    per_box = int(np.prod((ihi - ilo + 1).max(axis=0)))
    step = max(1, CHUNK_CELLS // per_box)
    # group boxes of similar shape so the padded enumeration stays tight
    order = np.lexsort(tuple((ihi - ilo).T))
    ilo, ihi = ilo[order], ihi[order]
    chunks = [(ilo[i : i + step], ihi[i : i + step]) for i in range(0, len(ilo), step)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda c: _enumerate_boxes(c[0], c[1], dim), chunks))
    else:
        parts = [_enumerate_boxes(a, b, dim) for a, b in chunks]
    return GridSet.from_keys(dim, spacing, np.unique(np.concatenate(parts)), presorted=True)
