import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

import oracles
from inclusion_reach.geometry import (
    Box,
    ConvexBody,
    HPolytope,
    contains,
    dist_boundary,
    erode,
    inflate,
    rasterize,
    rasterize_boundary,
)


def diamond():
    normals = [[1, 1], [1, -1], [-1, 1], [-1, -1]]
    return HPolytope(normals, [1, 1, 1, 1], Box([-1, -1], [1, 1]))


unit = Box([0, 0], [1, 1])


# -- inflate / erode ---------------------------------------------------------------


def test_inflate_box():
    w = inflate(unit, 0.5).world()
    assert np.allclose(w.lo, -0.5) and np.allclose(w.hi, 1.5)


def test_inflate_zero_is_identity():
    assert inflate(unit, 0).world() == unit


def test_inflate_negative_rejected():
    with pytest.raises(ValueError):
        inflate(unit, -0.1)


def test_inflate_diamond_offsets():
    w = inflate(diamond(), 0.5).world()
    assert np.allclose(w.offsets, 2.0)
    assert np.allclose(w.bbox.lo, -1.5) and np.allclose(w.bbox.hi, 1.5)


def test_inflate_diamond_dense_membership():
    # inflation by alpha = points within max-distance alpha of the diamond
    body = inflate(diamond(), 0.5)
    rng = np.random.default_rng(3)
    for x in rng.uniform(-2, 2, size=(400, 2)):
        d = oracles.dist_to_polytope(diamond().normals, diamond().offsets, x)
        if abs(d - 0.5) < 1e-6:
            continue
        assert contains(body, x) == (d <= 0.5)


def test_erode_examples():
    assert erode(unit, 0.6) is None
    w = erode(unit, 0.25).world()
    assert np.allclose(w.lo, 0.25) and np.allclose(w.hi, 0.75)
    e = erode(diamond(), 0.4).world()
    assert np.allclose(e.offsets, 0.2)


boxes = st.builds(
    lambda x, y, w, h: Box([x, y], [x + w, y + h]),
    st.floats(-2, 2),
    st.floats(-2, 2),
    st.floats(0, 2),
    st.floats(0, 2),
)


@given(boxes, st.floats(0, 0.5))
def test_erode_inflate_sandwich(box, alpha):
    rho = 0.1
    base = rasterize(box, 0, rho)
    assert base <= rasterize(erode(inflate(box, alpha), alpha), 0, rho)
    inner = erode(box, alpha)
    if inner is not None:
        assert rasterize(inflate(inner, alpha), 0, rho) <= base


# -- contains / dist_boundary ------------------------------------------------------


def test_contains_examples():
    assert contains(unit, [0.5, 0.5])
    assert not contains(diamond(), [0.6, 0.6])
    assert contains(unit, [1.0, 0.3])
    assert contains(diamond(), [0.5, 0.5])


def test_dist_boundary_examples():
    assert dist_boundary(unit, [0.4, 0.5]) == pytest.approx(0.4)
    assert dist_boundary(unit, [1.5, 0.5]) == pytest.approx(0.5)
    assert dist_boundary(diamond(), [0, 0]) == pytest.approx(0.5)


def test_dist_boundary_diamond_by_sampling():
    # brute force: distance from the centre to a dense sample of the boundary
    s = np.linspace(0, 1, 4001)
    edge = np.concatenate([np.stack([s, 1 - s], 1), np.stack([s, s - 1], 1), np.stack([-s, 1 - s], 1), np.stack([-s, s - 1], 1)])
    brute = np.max(np.abs(edge), axis=1).min()
    assert dist_boundary(diamond(), [0, 0]) == pytest.approx(brute, abs=1e-3)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_dist_boundary_polytope_exterior(x, y):
    p = diamond()
    assume(abs(x) + abs(y) > 1.01)
    ref = oracles.dist_to_polytope(p.normals, p.offsets, [x, y])
    assert dist_boundary(p, [x, y]) == pytest.approx(ref, abs=1e-8)


@given(boxes, st.floats(-3, 3), st.floats(-3, 3))
def test_dist_boundary_box(box, x, y):
    assert dist_boundary(box, [x, y]) == pytest.approx(oracles.box_dist_boundary(box.lo, box.hi, [x, y]), abs=1e-12)


# -- rasterization -----------------------------------------------------------------


def test_rasterize_box_count():
    cells = rasterize(Box.centered([0, 0], 0.1055), 0.0, 0.01)
    assert len(cells) == 441
    assert max(max(abs(a), abs(b)) for a, b in cells) == 10


def test_rasterize_point_tie_included():
    cells = rasterize(Box.point([0, 0]), 0.5, 1.0)
    # neighbours sit at distance 1 > 0.5
    assert set(cells) == {(0, 0)}
    # a point halfway between two grid points keeps both (closed ball)
    assert set(rasterize(Box.point([0.5, 0]), 0.5, 1.0)) == {(0, 0), (1, 0)}


def test_rasterize_diamond_count():
    cells = rasterize(diamond(), 0.0, 0.5)
    ref = oracles.scan_cells((-3, -3), (3, 3), 0.5, lambda p: abs(p[0]) + abs(p[1]) <= 1)
    assert set(cells) == ref
    assert len(cells) == 13


def test_rasterize_boundary_box():
    cells = set(rasterize_boundary(Box([-1, -1], [1, 1]), 0.25, 0.25))
    ref = {(i, j) for i in range(-5, 6) for j in range(-5, 6) if max(abs(i), abs(j)) in (3, 4, 5)}
    assert cells == ref
    assert len(cells) == 96


def test_rasterize_boundary_thin_box():
    thin = Box([0, -1], [0, 1])
    for alpha in (0.0, 0.1, 0.3):
        assert rasterize_boundary(thin, alpha, 0.1) == rasterize(thin, alpha, 0.1)


def test_rasterize_unbounded_rejected():
    with pytest.raises(ValueError):
        rasterize(Box([0, 0], [np.inf, 1]), 0, 0.1)


@given(boxes, st.floats(0, 0.4), st.sampled_from([0.05, 0.1, 0.25]))
def test_rasterize_boundary_box_bruteforce(box, alpha, rho):
    got = set(rasterize_boundary(box, alpha, rho))
    lo = np.floor((box.lo - alpha) / rho).astype(int) - 1
    hi = np.ceil((box.hi + alpha) / rho).astype(int) + 1
    tol = 1e-12 * max(1.0, float(np.abs(box.lo).max()), float(np.abs(box.hi).max())) * 4
    sure = oracles.scan_cells(lo, hi, rho, lambda p: oracles.box_dist_boundary(box.lo, box.hi, p) <= alpha - tol)
    maybe = oracles.scan_cells(lo, hi, rho, lambda p: oracles.box_dist_boundary(box.lo, box.hi, p) <= alpha + tol)
    assert sure <= got <= maybe


def random_polytope(rng):
    k = rng.integers(3, 7)
    ang = np.sort(rng.uniform(0, 2 * np.pi, k))
    normals = np.stack([np.cos(ang), np.sin(ang)], 1)
    offsets = rng.uniform(0.3, 1.0, k)
    return HPolytope(normals, offsets, Box([-1.2, -1.2], [1.2, 1.2]))


def halfspace_band(A, b, x, alpha, eps):
    """Membership in the half-space inflation minus the open half-space erosion."""
    n1 = np.abs(A).sum(axis=1)
    lhs = A @ x
    in_outer = np.all(lhs <= b + alpha * n1 + eps)
    strictly_inner = np.all(lhs < b - alpha * n1 - eps)
    return in_outer and not strictly_inner


@pytest.mark.parametrize("seed", range(8))
def test_rasterize_boundary_polytope_bruteforce(seed):
    rng = np.random.default_rng(seed)
    p = random_polytope(rng)
    assert p.has_interior()
    alpha, rho = 0.15, 0.1
    got = set(rasterize_boundary(p, alpha, rho))
    bn, bo = oracles.box_constraints(p.bbox.lo, p.bbox.hi)
    A, b = np.vstack([p.normals, bn]), np.concatenate([p.offsets, bo])
    window = ((-16, -16), (16, 16))

    # sound: every cell within alpha of the true boundary is kept
    exact = oracles.scan_cells(*window, rho, lambda x: oracles.polytope_dist_boundary(A, b, x) <= alpha - 1e-9)
    assert exact <= got
    # and the looseness is exactly that of inflating each half-space separately
    lo = oracles.scan_cells(*window, rho, lambda x: halfspace_band(A, b, x, alpha, -1e-9))
    hi = oracles.scan_cells(*window, rho, lambda x: halfspace_band(A, b, x, alpha, 1e-9))
    assert lo <= got <= hi
    # consistent with dist_boundary of the same body
    body = ConvexBody(p)
    by_dist = oracles.scan_cells(*window, rho, lambda x: dist_boundary(body, x, tol=1e-12) <= alpha + 1e-9)
    assert got <= by_dist


@given(boxes, st.floats(0, 0.4))
def test_rasterize_inflate_consistency(box, alpha):
    assert rasterize(box, alpha, 0.1) == rasterize(inflate(box, alpha), 0, 0.1)
    assert rasterize_boundary(box, alpha, 0.1) <= rasterize(box, alpha, 0.1)


@given(boxes, st.floats(0, 0.3), st.floats(0, 0.3))
def test_rasterize_monotone(box, a, b):
    a, b = sorted((a, b))
    assert rasterize(box, a, 0.1) <= rasterize(box, b, 0.1)


def test_polytope_without_interior():
    flat = HPolytope([[0, 1], [0, -1]], [0, 0], Box([-1, 0], [1, 0]))
    assert not flat.has_interior()
    assert diamond().has_interior()
