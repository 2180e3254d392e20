import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy.spatial import ConvexHull

from gmclab.regions import (ComplexParam, besov_threshold, boundary_residual, gamma_exponent, in_Ea, in_Eap,
                            optimal_r, real_moment_cutoff, region_boundary_polyline)

dims = st.integers(1, 4)
orders = st.floats(1.0, 12.0)
coords = st.floats(-3.0, 3.0, allow_nan=False)


@st.composite
def ea_points(draw):
    """(beta, d) strictly inside E_a, drawn in polar form."""
    d = draw(dims)
    t = draw(st.floats(0, 2 * math.pi))
    frac = draw(st.floats(0.0, 0.999))
    c, s = abs(math.cos(t)), abs(math.sin(t))
    rmax = math.sqrt(2 * d) / (c + s) if s <= c else math.sqrt(d)
    return complex(frac * rmax * math.cos(t), frac * rmax * math.sin(t)), d


def hull_oracle(d, n_circle=20000):
    t = np.linspace(0, 2 * np.pi, n_circle, endpoint=False)
    pts = np.column_stack([np.cos(t), np.sin(t)]) * math.sqrt(d)
    pts = np.vstack([pts, [[math.sqrt(2 * d), 0], [-math.sqrt(2 * d), 0]]])
    return ConvexHull(pts)


def test_trivial_membership():
    assert in_Ea(0, 1)
    assert in_Ea(0.99j, 1) and not in_Ea(1j, 1)
    assert in_Ea(1.4, 1) and not in_Ea(math.sqrt(2), 1)
    assert not in_Ea(2.0, 2) and in_Ea(1.99, 2)
    assert in_Ea(ComplexParam(0.5, 0.5), 1)


def test_real_moment_cutoff():
    assert real_moment_cutoff(1.0, 1) == 2.0
    assert real_moment_cutoff(0.5, 2) == 16.0
    with pytest.raises(ValueError):
        real_moment_cutoff(math.sqrt(2), 1)


def test_input_validation():
    with pytest.raises(ValueError):
        in_Ea(0.1, 0)
    with pytest.raises(ValueError):
        in_Eap(0.1, 0.5, 1)
    with pytest.raises(ValueError):
        besov_threshold(2.0, 2, 1)
    with pytest.raises(ValueError):
        gamma_exponent(0.5, 0, 2, 0.1, 1)
    with pytest.raises(ValueError):
        ComplexParam(float("nan"), 0)


def test_hull_oracle_agreement():
    rng = np.random.default_rng(11)
    for d in (1, 2, 3):
        hull = hull_oracle(d)
        pts = rng.uniform(-1.6, 1.6, size=(20000, 2)) * math.sqrt(d)
        margin = (pts @ hull.equations[:, :2].T + hull.equations[:, 2]).max(axis=1)
        clear = np.abs(margin) > 1e-7 * d
        got = np.array([in_Ea(complex(*p), d) for p in pts])
        assert np.all(got[clear] == (margin[clear] < 0))


@given(coords, coords, dims)
def test_Ea_symmetries(x, y, d):
    b = complex(x, y)
    assert in_Ea(b, d) == in_Ea(b.conjugate(), d) == in_Ea(-b, d)


@given(coords, coords, dims, orders)
def test_Eap_inside_Ea_and_symmetric(x, y, d, p):
    b = complex(x, y)
    if in_Eap(b, p, d):
        assert in_Ea(b, d)
    assert in_Eap(b, p, d) == in_Eap(b.conjugate(), p, d)


@given(coords, coords, dims, orders, st.floats(0.0, 5.0))
def test_Eap_shrinks_with_p(x, y, d, p, dp):
    b = complex(x, y)
    if in_Eap(b, p + dp, d):
        assert in_Eap(b, p, d)


@given(coords, dims)
def test_imaginary_axis_always_in_Eap(y, d):
    # finite moments of every order on the imaginary axis inside the disk
    assume(abs(y) < math.sqrt(d) * 0.999)
    for p in (1, 2, 5, 50):
        assert in_Eap(complex(0, y), p, d)


@given(coords, dims)
def test_real_axis_matches_moment_cutoff(x, d):
    x = abs(x)
    assume(0.01 < x < math.sqrt(2 * d) * 0.999)
    p_c = real_moment_cutoff(x, d)
    assume(abs(p_c - round(p_c)) > 1e-6)
    for p in (1.0, 1.5, 2.0, 3.0, 8.0):
        if abs(p - p_c) > 1e-9:
            assert in_Eap(x, p, d) == (p < p_c)


@pytest.mark.parametrize("beta,p,d,expected", [
    (1j / math.sqrt(2), 2, 2, -0.25),
    (0.8j, 2, 1, -0.32),
    (0.3 + 0.5j, 2, 1, -0.17),
    (1.2, 2, 1, -0.477056274847714058562026469052),
    (1.0 + 0.2j, 3, 2, -0.853333333333333333333333333333),
    (0, 3, 1, 0.0),
])
def test_threshold_values(beta, p, d, expected):
    assert besov_threshold(beta, p, d) == pytest.approx(expected, abs=1e-13)


@given(st.floats(1.0, 10.0), st.floats(0, 1), dims)
def test_threshold_branches_agree_at_switch(p, frac, d):
    x = math.sqrt(2 * d) / p
    # the two branches are evaluated directly at the switch point
    for ymax in (math.sqrt(2 * d) - x,):
        y = frac * ymax * 0.999
        b = complex(x, y)
        assume(in_Ea(b, d))
        below = besov_threshold(complex(math.nextafter(x, 0), y), p, d)
        above = besov_threshold(complex(math.nextafter(x, 10), y), p, d)
        assert abs(below - above) < 1e-12


@given(ea_points(), orders)
def test_threshold_is_zero_of_level_exponent(bd, p):
    b, d = bd
    assert in_Ea(b, d)
    s = besov_threshold(b, p, d)
    r = optimal_r(b, p, d)
    assert 1 <= r <= p
    assert abs(gamma_exponent(r, s, p, b, d)) < 1e-9


@given(ea_points(), orders)
def test_optimal_r_minimises_gamma(bd, p):
    b, d = bd
    r = optimal_r(b, p, d)
    grid = np.linspace(1, p, 400)
    vals = [gamma_exponent(t, 0.0, p, b, d) for t in grid]
    assert gamma_exponent(r, 0.0, p, b, d) <= min(vals) + 1e-9


@given(ea_points(), orders)
def test_threshold_decreases_with_modulus(bd, p):
    b, d = bd
    assume(in_Ea(1.05 * b, d))
    assert besov_threshold(1.05 * b, p, d) <= besov_threshold(b, p, d) + 1e-12


def shoelace(pts):
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_Ea_polyline_matches_hull(d):
    poly = region_boundary_polyline("Ea", None, d, 4000)
    assert np.array_equal(poly[0], poly[-1])
    area = shoelace(poly)
    assert area > 0  # counterclockwise
    # exact area: disk plus two kites minus the caps they cover
    exact = math.pi * d / 2 + 2 * d
    assert area == pytest.approx(exact, rel=1e-5)
    hull = hull_oracle(d)
    assert area == pytest.approx(hull.volume, rel=1e-5)
    assert max(boundary_residual(p, "Ea", None, d) for p in poly) < 1e-12


def test_Ea_polyline_d2_contains_corner_vertices():
    poly = region_boundary_polyline("Ea", None, 2, 64)
    for v in [(2, 0), (1, 1), (-2, 0), (1, -1), (-1, 1), (-1, -1)]:
        assert np.min(np.hypot(poly[:, 0] - v[0], poly[:, 1] - v[1])) < 1e-12


@pytest.mark.parametrize("p,d", [(1.5, 1), (2, 1), (3, 1), (2, 2), (4, 2), (6, 3)])
def test_Eap_polyline(p, d):
    poly = region_boundary_polyline("Eap", p, d, 2000)
    assert shoelace(poly) > 0
    assert max(boundary_residual(q, "Eap", p, d) for q in poly) < 1e-12
    # the polygon is inscribed: midpoints of edges pulled slightly inward lie inside
    mids = 0.5 * (poly[:-1] + poly[1:]) * (1 - 1e-6)
    assert all(in_Eap(complex(*m), p, d) for m in mids[::7])
    corner = (math.sqrt(2 * d) / p, math.sqrt(2 * d) * (p - 1) / p)
    if in_Ea(complex(*corner) * (1 - 1e-9), d) and corner[0] > math.sqrt(d / 2):
        assert np.min(np.hypot(poly[:, 0] - corner[0], poly[:, 1] - corner[1])) < 1e-12


def test_Eap_p1_is_Ea():
    # the ellipse clause is empty at p = 1 and the strip |Re| < sqrt(2d) covers E_a
    a = region_boundary_polyline("Eap", 1.0, 2, 500)
    b = region_boundary_polyline("Ea", None, 2, 500)
    assert shoelace(a) == pytest.approx(shoelace(b), rel=1e-12)


def test_L2circle():
    poly = region_boundary_polyline("L2circle", None, 2, 100)
    assert np.allclose(np.hypot(poly[:, 0], poly[:, 1]), math.sqrt(2))


def test_polyline_validation():
    with pytest.raises(ValueError):
        region_boundary_polyline("Eb", None, 1, 100)
    with pytest.raises(ValueError):
        region_boundary_polyline("Ea", None, 1, 4)
    with pytest.raises(ValueError):
        region_boundary_polyline("Eap", 0.5, 1, 100)
