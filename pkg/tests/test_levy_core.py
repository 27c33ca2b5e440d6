import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bhplab import levy_core as lc


def stable_triple(d, alpha, c=1.0):
    return lc.LevyTriple(d, np.zeros((d, d)), np.zeros(d), lc.IsotropicStable(alpha, c))


def stable_phi(d, alpha, c, r):
    return lc.sphere_area(d) * c * r ** (-alpha) * (1 / (2 - alpha) + 1 / alpha)


# --- oracles -----------------------------------------------------------------


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("r", [1e-3, 0.5, 7.0])
def test_brownian_phi_is_2d_over_r2(d, r):
    assert lc.pruitt_phi(lc.brownian_triple(d), r) == pytest.approx(2 * d / r**2, rel=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("alpha", [0.3, 1.0, 1.7])
def test_stable_phi_closed_form(d, alpha):
    for r in (1e-2, 0.3, 1.0, 40.0):
        assert lc.pruitt_phi(stable_triple(d, alpha, 1.3), r) == pytest.approx(stable_phi(d, alpha, 1.3, r), rel=1e-8)


def test_pruitt_components_split_brownian_and_stable():
    t = lc.LevyTriple(2, 2 * np.eye(2), np.zeros(2), lc.IsotropicStable(1.0))
    K, G, L = lc.pruitt_components(t, 0.5)
    assert K + G + L == pytest.approx(16.0 + stable_phi(2, 1.0, 1.0, 0.5), rel=1e-8)
    assert L == 0.0


def test_brownian_char_exponent():
    t = lc.brownian_triple(2)
    assert lc.char_exponent(t, [1.0, 2.0]) == pytest.approx(-5.0)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_stable_char_exponent_matches_cos_constant(d):
    alpha, c = 0.7, 1.3
    u = np.zeros(d)
    u[-1] = 2.0
    psi = lc.char_exponent(stable_triple(d, alpha, c), u)
    assert psi.real == pytest.approx(-c * lc.stable_cos_constant(d, alpha) * 2**alpha, rel=1e-6)
    assert abs(psi.imag) < 1e-12


def test_one_sided_measure_has_imaginary_part_and_truncated_drift():
    jm = lc.radial_family("tempered", 1, True, c=1.0, alpha=0.5, lam=1.0)
    t = lc.LevyTriple(1, np.zeros((1, 1)), np.zeros(1), jm)
    assert lc.char_exponent(t, [1.0]).imag != 0
    assert lc.truncated_drift(t, 0.5)[0] != 0
    sym = lc.LevyTriple(1, np.zeros((1, 1)), np.zeros(1), lc.radial_family("tempered", 1, c=1.0, alpha=0.5, lam=1.0))
    assert lc.truncated_drift(sym, 0.5)[0] == 0


def test_brownian_doubling_ratio_is_quarter():
    rep = lc.check_phi_doubling(lc.brownian_triple(2), [2.0**k for k in range(-5, 6)])
    assert rep.min_ratio == pytest.approx(0.25) and rep.max_ratio == pytest.approx(0.25)


# --- properties --------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(0.05, 1.95), r=st.floats(1e-3, 1e3), d=st.integers(1, 3))
def test_stable_phi_scales_exactly(alpha, r, d):
    t = stable_triple(d, alpha)
    assert lc.pruitt_phi(t, 2 * r) / lc.pruitt_phi(t, r) == pytest.approx(2 ** (-alpha), rel=1e-7)


@settings(max_examples=30, deadline=None)
@given(scale=st.floats(1e-2, 10), r=st.floats(1e-2, 1e2), b=st.floats(-5, 5))
def test_phi_doubling_bounds_hold_for_mixtures(scale, r, b):
    t = lc.LevyTriple(1, [[scale]], [b], lc.radial_family("gaussian", 1, c=1.0, scale=scale))
    p1, p2 = lc.pruitt_phi(t, r), lc.pruitt_phi(t, 2 * r)
    assert p1 / 16 * (1 - 1e-9) <= p2 <= 3 * p1 * (1 + 1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 1.9), st.floats(0.1, 10.0))
def test_triple_json_roundtrip(alpha, c):
    t = lc.LevyTriple(2, np.eye(2), [0.5, -1.0], lc.IsotropicStable(alpha, c))
    back = lc.triple_from_json(lc.triple_to_json(t))
    assert lc.pruitt_phi(back, 0.7) == pytest.approx(lc.pruitt_phi(t, 0.7), rel=1e-14)


# --- errors ------------------------------------------------------------------


def test_degenerate_triple_is_rejected():
    t = lc.LevyTriple(2, np.zeros((2, 2)), np.zeros(2), None)
    assert t.is_degenerate
    with pytest.raises(lc.DegenerateTripleError):
        lc.check_phi_doubling(t, [1.0])
    assert not lc.LevyTriple(2, np.zeros((2, 2)), [1.0, 0.0], None).is_degenerate


def test_non_integrable_measure_raises():
    t = lc.LevyTriple(2, np.zeros((2, 2)), np.zeros(2), lc.IsotropicRadial(lambda s: s**-4.5))
    with pytest.raises(lc.IntegrabilityError):
        t.check_integrability()


@pytest.mark.parametrize("A", [[[1.0, 2.0], [0.0, 1.0]], [[-1.0, 0.0], [0.0, 1.0]]])
def test_invalid_gaussian_matrix(A):
    with pytest.raises(lc.LevyError):
        lc.LevyTriple(2, A, np.zeros(2), None)


def test_stable_parameter_range():
    with pytest.raises(lc.LevyError):
        lc.IsotropicStable(2.0)


def test_hartman_wintner_verdicts():
    grid = [1.0, 10.0, 100.0, 1000.0]
    cp = lc.LevyTriple(1, np.zeros((1, 1)), np.zeros(1), lc.radial_family("gaussian", 1, c=1.0, scale=1.0))
    assert lc.check_hartman_wintner(cp, grid).verdict == "fails"
    assert lc.check_hartman_wintner(stable_triple(2, 0.7), grid).verdict == "increasing"


def test_phi_doubling_with_narrow_one_sided_bump():
    # truncated first moment comes from a bump near |z| = 1 inside a long interval
    jm = lc.radial_family("gaussian", 1, True, c=2.42, scale=0.49)
    t = lc.LevyTriple(1, [[0.0]], [0.0], jm)
    rep = lc.check_phi_doubling(t, [2.0**k for k in range(-10, 11)])
    # for large r the truncated drift term ~ m1 / r dominates, so the ratio tends to 1/2 smoothly
    assert rep.ratios[-1] == pytest.approx(0.5, abs=0.01)
    assert np.all(np.abs(np.diff(np.log(rep.ratios))) < 0.6)


def test_truncated_density_discontinuity_is_a_quadrature_node():
    jm = lc.radial_family("truncated", 2, c=58.0, alpha=1.93, cutoff=1.48)
    t = lc.LevyTriple(2, np.zeros((2, 2)), [0.0, 0.0], jm)
    r = 0.125
    # only the r^-alpha power law up to the cutoff contributes
    s0 = 2 * math.pi * 58.0
    expected = s0 * (r**-1.93 / (2 - 1.93) + (r**-1.93 - 1.48**-1.93) / 1.93)
    assert lc.pruitt_phi(t, r) == pytest.approx(expected, rel=1e-8)
