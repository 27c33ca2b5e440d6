import math

import numpy as np
import pytest

from bhplab import experiments as ex
from bhplab import geometry as g
from bhplab import levy_core
from bhplab import subordination as sb
from bhplab.sampler import PathConfig

BM = sb.ProcessSpec(2, sb.preset("bm"))
MIX = sb.ProcessSpec(2, sb.preset("bm+stable(0.5)"))
TH = ex.Thresholds()


def test_growth_verdict_rule():
    assert ex.growth_verdict([(1.0, 1.0, 0.01), (0.1, 2.0, 0.01)], TH)[0] == ex.GROWING
    assert ex.growth_verdict([(1.0, 1.0, 0.01), (0.1, 1.05, 0.01)], TH)[0] == ex.BOUNDED
    assert ex.growth_verdict([(1.0, 1.0, 0.2), (0.1, 1.4, 0.2)], TH)[0] is None


def test_identical_points_give_unit_ratio():
    assert ex._pairwise_max([2.0, 2.0], [5.0, 5.0]) == (1.0, None)
    best, arg = ex._pairwise_max([1.0, 4.0], [1.0, 2.0])
    assert best == pytest.approx(2.0) and arg == (1, 0)


def test_axis_ratio_classifier_on_synthetic_profiles():
    a = 2.0 ** -np.arange(3, 8)
    assert ex.classify_axis_ratio(a, np.ones_like(a), TH)[0] == "bounded"
    assert ex.classify_axis_ratio(a, np.log(2 / a), TH)[0] == "log-divergent"
    cls, info = ex.classify_axis_ratio(a, a**-0.5, TH)
    assert cls == "power-divergent" and info["divergence_exponent"] == pytest.approx(0.5)


def test_thresholds_override_and_unknown_keys():
    assert ex.Thresholds.from_json({"levy_band": 3}).levy_band == 3.0
    with pytest.raises(ex.ExperimentError):
        ex.Thresholds.from_json({"nope": 1})


def test_pruitt_brownian_product_is_one():
    rep = ex.verify_pruitt(BM, [2.0**-k for k in range(0, 9, 4)], 4000)
    assert rep.verdict == ex.CONSISTENT
    for row in rep.rows:
        assert abs(row["p"] - 1) < 4 * row["p_stderr"]


def test_pruitt_needs_two_decades():
    with pytest.raises(ex.ExperimentError):
        ex.verify_pruitt(BM, [1.0, 0.5], 10)


def test_levy_system_rejects_continuous_process():
    with pytest.raises(ex.DomainError):
        ex.verify_levy_system_exit(BM, g.upper_halfspace(2), [0, 0], [0.1, 0.2], 10)


def test_bhp_scan_rejects_continuous_process():
    with pytest.raises(ex.DomainError):
        ex.bhp_ratio_scan(BM, g.upper_halfspace(2), [0, 0], [0.1, 0.2, 0.4], 10)


def test_a4_range_error():
    with pytest.raises(ex.RangeError):
        ex.verify_A4(MIX, g.cone(math.pi / 5, 1.0), [0, 0], [0.1, 0.3], 10)


def test_a4_brownian_half_plane_is_bounded():
    rep = ex.verify_A4(BM, g.upper_halfspace(2), [0, 0], [0.25, 1.0, 4.0], 1000, points=2)
    assert rep.verdict == ex.CONSISTENT
    assert 1 < rep.fitted["C"] < 4.5


def test_condition_driver_needs_three_scales():
    with pytest.raises(ex.ExperimentError):
        ex.test_condition_1_4a(MIX, g.upper_halfspace(2), [0, 0], [1.0, 2.0], n_paths=10)


def test_interior_points_lie_in_the_localised_domain():
    dom = g.cone(math.pi / 3, 10.0)
    pts = ex.interior_points(dom, [0, 0], 0.5, 20, seed=4)
    local = ex.localize(dom, [0, 0], 0.5)
    assert pts.shape == (20, 2) and np.all(local.contains(pts))
    assert np.all(local.dist_to_boundary(pts) >= 0.05 - 1e-12)


def test_axis_points_follow_corkscrew_direction():
    pts = ex.axis_points(g.upper_halfspace(2), [1.0, 0.0], 2.0, [0.25, 0.5])
    assert np.allclose(pts, [[1.0, 0.5], [1.0, 1.0]])


def test_cone_scan_rejects_short_range_and_bad_angles():
    with pytest.raises(ex.ExperimentError):
        ex.cone_counterexample_scan([math.pi / 4], a_range=(0.1, 0.2))
    with pytest.raises(ex.ExperimentError):
        ex.cone_counterexample_scan([4.0], h=1 / 128, a_range=(2.0**-4, 2.0**-1))
    with pytest.raises(ex.ExperimentError):
        ex.cone_counterexample_scan([math.pi / 4], mode="other")


def test_cone_scan_oracle_coarse_grid_is_monotone():
    # coarse grid: only the ordering is robust, the full-resolution check lives in the acceptance suite
    rep = ex.cone_counterexample_scan([2 * math.pi / 3, math.pi / 4, math.pi / 5], h=1 / 256,
                                      a_range=(2.0**-5, 2.0**-2))
    assert rep.fitted["monotone_in_angle"]
    assert rep.fitted["classes"][-1] == "power-divergent"
    bands = [row["band"] for row in rep.rows]
    assert bands[0] < bands[1] < bands[2]


def test_random_triples_are_valid_and_reproducible():
    a, b = ex.random_triples(20, 5), ex.random_triples(20, 5)
    assert [levy_core.triple_to_json(t) for t in a] == [levy_core.triple_to_json(t) for t in b]
    assert all(not t.is_degenerate for t in a)
    assert ex.phi_doubling_survey(a, [2.0**k for k in range(-3, 4)]).verdict == ex.CONSISTENT


def test_reports_are_byte_identical_on_rerun():
    run = lambda: ex.verify_pruitt(MIX, [1.0, 0.1, 0.01], 500, PathConfig(seed=9)).dumps()
    assert run() == run()
