import math

import numpy as np
import pytest

from bhplab import geometry as g
from bhplab import pde_oracle as po


@pytest.fixture(scope="module")
def disc_fields():
    disc = g.Ball([0.0, 0.0], 1.0)
    return {h: po.solve_mean_exit_bm(disc, h) for h in (1 / 32, 1 / 64)}


def test_disc_centre_exit_time(disc_fields):
    for h, f in disc_fields.items():
        assert abs(f.at([0.0, 0.0]) - 0.25) <= 0.5 * h * h


def test_grid_convergence_is_second_order():
    disc = g.Ball([0.0, 0.0], 1.0)
    p = [0.3, 0.2]
    exact = float(po.ball_exit_time(p)[0])
    errs = [abs(po.solve_mean_exit_bm(disc, h).interp(p)[0] - exact) for h in (1 / 32, 1 / 64)]
    assert errs[0] / max(errs[1], 1e-16) >= 3


def test_annulus_exit_time():
    f = po.solve_mean_exit_bm(_Annulus(), 1 / 128)
    exact = float(po.annulus_exit_time(0.75, 0.5, 1.0))
    # radial solution of -u'' - u'/r = 1 with u(1/2) = u(1) = 0
    assert exact == pytest.approx((1 - 0.75**2) / 4 - 0.75 / (4 * math.log(2)) * math.log(1 / 0.75), rel=1e-12)
    assert f.interp([0.75, 0.0])[0] == pytest.approx(exact, rel=0.01)


class _Annulus(g.Domain):
    dim = 2

    def _contains(self, x):
        r = np.linalg.norm(x, axis=1)
        return (r > 0.5) & (r < 1.0)

    def _dist(self, x):
        r = np.linalg.norm(x, axis=1)
        return np.minimum(r - 0.5, 1.0 - r)

    def _project(self, x):
        r = np.linalg.norm(x, axis=1, keepdims=True)
        return np.where(r - 0.5 < 1 - r, 0.5, 1.0) * x / r

    def bounding_box(self):
        return np.array([-1.0, -1.0]), np.array([1.0, 1.0])

    def localization_radius(self):
        return 1.0


def test_green_matches_disc_closed_form_and_is_symmetric():
    disc = g.Ball([0.0, 0.0], 1.0)
    h = 1 / 128
    y = np.array([0.5, 0.0])
    G = po.solve_green_bm(disc, y, h)
    for x in ([0.0, 0.0], [-0.4, 0.3], [0.5, 0.5]):
        assert G.interp(x)[0] == pytest.approx(float(po.ball_green_2d(x, y)[0]), rel=0.03)
    G2 = po.solve_green_bm(disc, [-0.5, 0.25], h)
    assert G.at([-0.5, 0.25]) == pytest.approx(G2.at([0.5, 0.0]), rel=0.01)


def test_harmonic_measure_constant_and_complement():
    disc = g.Ball([0.0, 0.0], 1.0)
    one = po.solve_harmonic_measure_bm(disc, lambda p: np.ones(len(p)), 1 / 32)
    assert np.allclose(one.values[one.mask], 1.0, atol=1e-8)
    A = lambda p: (p[:, 0] > 0).astype(float)
    hA = po.solve_harmonic_measure_bm(disc, A, 1 / 32)
    hB = po.solve_harmonic_measure_bm(disc, lambda p: 1 - A(p), 1 / 32)
    assert np.allclose(hA.values[hA.mask] + hB.values[hB.mask], 1.0, atol=1e-8)
    assert hA.values.min() >= -1e-12 and hA.values.max() <= 1 + 1e-12


def test_half_disk_harmonic_measure():
    R, a = 8.0, 0.5
    assert po.half_disk_harmonic_measure(a, R) == pytest.approx(0.5, abs=0.02)
    dom = g.Ball([0.0, 0.0], R)

    class HalfDisk(g.Domain):
        dim = 2
        _contains = lambda self, x: dom._contains(x) & (x[:, 1] > 0)
        _dist = lambda self, x: np.minimum(dom._dist(x), x[:, 1])
        bounding_box = lambda self: (np.array([-R, 0.0]), np.array([R, R]))
        localization_radius = lambda self: R

    f = po.solve_harmonic_measure_bm(HalfDisk(), lambda p: (np.abs(p[:, 0]) <= a) & (p[:, 1] < 1e-9), 1 / 32)
    assert f.interp([0.0, a])[0] == pytest.approx(po.half_disk_harmonic_measure(a, R), abs=0.02)


def test_fields_are_nonnegative():
    f = po.solve_mean_exit_bm(g.cone(math.pi / 4, 1.0), 1 / 64)
    assert f.values.min() >= 0 and np.all(f.values[~f.mask] == 0)


@pytest.mark.parametrize("angle", [math.pi / 3, math.pi / 4])
def test_green_axis_exponent_on_cones(angle):
    h = 1 / 256
    G = po.solve_green_bm(g.cone(angle, 1.0), [0.0, 0.75], h)
    a = po.dyadic_axis_points(2.0**-5, 2.0**-1)
    fit = po.fit_axis_exponent(a, G.interp(np.c_[np.zeros_like(a), a]), h)
    assert fit.q_power == pytest.approx(math.pi / (2 * angle), rel=0.06)


def test_fit_detects_pure_power_and_log_models():
    a = 2.0 ** -np.arange(2, 9)
    assert not po.fit_axis_exponent(a, a**1.5).log_correction_detected
    fit = po.fit_axis_exponent(a, a**2 * np.log(1 / a))
    assert fit.log_correction_detected and fit.beta == pytest.approx(1.0, abs=0.05)


def test_fit_rejects_short_range_and_vertex_points():
    with pytest.raises(ValueError):
        po.fit_axis_exponent([0.1, 0.11, 0.12, 0.13, 0.14], [1, 2, 3, 4, 5])
    with pytest.raises(ValueError):
        po.fit_axis_exponent(2.0 ** -np.arange(2, 9), np.ones(7), h=1 / 64)


def test_pole_too_close_to_boundary():
    with pytest.raises(g.GeometryError):
        po.solve_green_bm(g.Ball([0.0, 0.0], 1.0), [0.99, 0.0], 1 / 32)


def test_axis_profile_csv(tmp_path):
    a = np.array([0.25, 0.5])
    po.write_axis_profile_csv(tmp_path / "p.csv", a, [1.0, 2.0])
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "a,value" and len(lines) == 3
