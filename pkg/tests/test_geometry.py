import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from bhplab import geometry as g

pts2 = st.tuples(st.floats(-3, 3), st.floats(-3, 3)).map(np.array)


def test_ball_distance_and_projection():
    b = g.Ball([1.0, 0.0], 2.0)
    assert b.dist_to_boundary([1.0, 0.0]) == pytest.approx(2.0)
    assert np.allclose(b.project_to_boundary([2.0, 0.0]), [3.0, 0.0])
    assert b.contains([2.9, 0.0]) and not b.contains([3.1, 0.0])


def test_halfspace():
    h = g.upper_halfspace(3)
    assert h.contains([5.0, -2.0, 0.1]) and not h.contains([0.0, 0.0, -0.1])
    assert h.dist_to_boundary([1.0, 1.0, 0.25]) == pytest.approx(0.25)
    assert h.localization_radius() == math.inf


@pytest.mark.parametrize("angle", [math.pi / 5, math.pi / 4, 2 * math.pi / 3])
def test_cone_membership_and_axis_distance(angle):
    c = g.cone(angle, 1.0)
    a = 0.3
    assert c.contains([0.0, a])
    # distance from an axis point to the lateral boundary
    expected = a * math.sin(angle) if angle <= math.pi / 2 else a
    assert c.dist_to_boundary([0.0, a]) == pytest.approx(min(expected, 1 - a), rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(angle=st.floats(0.2, 2.9), rho=st.floats(0.01, 1.99), frac=st.floats(-0.99, 0.99))
def test_cone_projection_lies_on_boundary_at_reported_distance(angle, rho, frac):
    c = g.cone(angle, 2.0)
    # polar sample around the axis, so no inputs are wasted outside the cone
    p = rho * np.array([math.sin(frac * angle), math.cos(frac * angle)])
    assume(bool(c.contains(p)))
    q = c.project_to_boundary(p)
    assert np.linalg.norm(q - p) == pytest.approx(float(c.dist_to_boundary(p)), abs=1e-9)
    assert float(c.dist_to_boundary(q)) < 1e-9


@settings(max_examples=200, deadline=None)
@given(p=pts2)
def test_intersection_is_conjunction(p):
    base = g.cone(math.pi / 3, 5.0)
    dom = base.intersect_ball([0.0, 0.0], 1.5)
    assert bool(dom.contains(p)) == (bool(base.contains(p)) and np.linalg.norm(p) < 1.5)
    if dom.contains(p):
        assert float(dom.dist_to_boundary(p)) <= float(base.dist_to_boundary(p)) + 1e-12


@settings(max_examples=100, deadline=None)
@given(p=pts2)
def test_vectorised_queries_match_scalar(p):
    c = g.cone(math.pi / 4, 2.0)
    batch = np.vstack([p, p + 0.1])
    assert c.contains(batch)[0] == c.contains(p)
    assert c.dist_to_boundary(batch)[0] == pytest.approx(float(c.dist_to_boundary(p)))


def test_domain_json_roundtrip():
    for dom in (g.Ball([0.0, 1.0], 2.0), g.upper_halfspace(2), g.cone(1.0, 3.0),
                g.cone(1.0, 3.0).intersect_ball([0, 0], 1.0)):
        back = g.domain_from_json(dom.to_json())
        assert back.to_json() == dom.to_json()


def test_critical_angle_and_exponents():
    assert g.critical_angle(2) == pytest.approx(math.pi / 4)
    assert g.critical_angle(3) == pytest.approx(math.acos(1 / math.sqrt(3)))
    assert g.cone_harmonic_exponent(2, math.pi / 4).q == pytest.approx(2.0)
    assert g.cone_harmonic_exponent(2, math.pi / 3).q == pytest.approx(1.5)
    assert g.cone_harmonic_exponent(2, math.pi / 5).cls is g.ExponentClass.ABOVE_TWO
    e3 = g.cone_harmonic_exponent(3, 2.0)
    assert e3.cls is g.ExponentClass.BELOW_TWO and e3.q is None
    with pytest.raises(g.GeometryError):
        g.critical_angle(1)


def test_corkscrew_points():
    c = g.cone(math.pi / 4, 1.0)
    cs = g.corkscrew_point(c, [0, 0], 0.5)
    assert np.allclose(cs.point, [0, 0.5]) and cs.kappa == pytest.approx(math.sin(math.pi / 4))
    hs = g.corkscrew_point(g.upper_halfspace(2), [3.0, 0.0], 2.0)
    assert np.allclose(hs.point, [3.0, 2.0]) and hs.kappa == pytest.approx(1.0)
    with pytest.raises(g.GeometryError):
        g.corkscrew_point(c, [0, 0], 1.0)


def test_cone_as_graph_agrees_with_cone():
    c = g.cone(math.pi / 3, 10.0)
    patch = g.cone_as_graph(c, window=2.0)
    rng = np.random.default_rng(1)
    p = rng.uniform(-1, 1, size=(500, 2))
    assert np.array_equal(patch.contains(p), c.contains(p))
    assert patch.lipschitz == pytest.approx(1 / math.sqrt(3))


def test_interior_cone_and_boundary_point_checks():
    c = g.cone(math.pi / 3, 1.0)
    assert g.interior_cone_check(c, np.array([0.0, 0.2]), [0, 1], 0.3, 0.1)
    assert g.boundary_point_check(c, [0.0, 0.0])
    assert not g.boundary_point_check(c, [0.0, -0.5])


@pytest.mark.parametrize("bad", [lambda: g.Ball([0, 0], 0.0), lambda: g.TruncatedCone([0, 0], [0, 2], 1.0, 1.0),
                                 lambda: g.cone(math.pi, 1.0)])
def test_invalid_domains(bad):
    with pytest.raises(g.GeometryError):
        bad()
