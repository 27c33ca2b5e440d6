import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from bhplab import geometry as g
from bhplab import pde_oracle as po
from bhplab import sampler as sm
from bhplab import subordination as sb

BM2 = sb.ProcessSpec(2, sb.preset("bm"))
CFG = sm.PathConfig(dt=1e-2)


def stable_ball_exit(r, d, a):
    """E_0 tau_{B(0,r)} for the rotationally invariant a-stable process, generator -(-Delta)^{a/2}."""
    return r**a * special.gamma(d / 2) / (2**a * special.gamma(1 + a / 2) * special.gamma((d + a) / 2))


# --- oracles -----------------------------------------------------------------


@pytest.mark.parametrize("x0", [[0.0, 0.0], [0.5, -0.3]])
def test_brownian_ball_exit_time(x0):
    disc = g.Ball([0.0, 0.0], 1.0)
    e = sm.estimate_mean_exit_time(BM2, disc, x0, CFG, 20_000, stream=(1,))
    exact = float(po.ball_exit_time(x0)[0])
    assert abs(e.mean - exact) < 4 * e.stderr
    assert e.censored_frac == 0


def test_drift_rescales_time():
    fast = sb.ProcessSpec(2, sb.preset("bm", drift=2.0))
    e = sm.estimate_mean_exit_time(fast, g.Ball([0.0, 0.0], 1.0), [0, 0], CFG, 20_000)
    assert abs(e.mean - 0.125) < 4 * e.stderr


def test_stable_ball_exit_time():
    proc = sb.ProcessSpec(2, sb.SubordinatorSpec(0.0, sb.Stable(0.75)))
    e = sm.estimate_mean_exit_time(proc, g.Ball([0.0, 0.0], 1.0), [0, 0], CFG, 20_000)
    exact = stable_ball_exit(1.0, 2, 1.5)
    assert abs(e.mean - exact) < 4 * e.stderr + 0.01 * exact


def test_sup_tail_matches_reflection_series():
    bm1 = sb.ProcessSpec(1, sb.preset("bm"))
    t, r = 0.1, 0.5
    # P(sup_{s<=t} |B_s| < r) for variance 2 per unit time
    ks = np.arange(50)
    stay = 4 / math.pi * np.sum((-1.0) ** ks / (2 * ks + 1) * np.exp(-((2 * ks + 1) ** 2) * math.pi**2 * 2 * t / (8 * r * r)))
    e = sm.estimate_sup_tail(bm1, t, r, CFG, 20_000)
    assert abs(e.mean - (1 - stay)) < 4 * e.stderr + 0.01


def test_green_estimate_on_disc():
    disc = g.Ball([0.0, 0.0], 1.0)
    y = [0.5, 0.0]
    ge = sm.estimate_green(BM2, disc, [-0.3, 0.0], y, 0.05, CFG, 20_000)
    exact = float(po.ball_green_2d([-0.3, 0.0], y)[0])
    assert abs(ge.value.mean - exact) < 4 * ge.value.stderr + 0.03 * exact
    assert abs(ge.bandwidth_sensitivity) < 0.1


def test_exit_distribution_half_disc():
    R, a = 4.0, 0.5
    half = g.Ball([0.0, 0.0], R)

    class HalfDisk(g.Domain):
        dim = 2
        _contains = lambda self, x: half._contains(x) & (x[:, 1] > 0)
        _dist = lambda self, x: np.minimum(half._dist(x), x[:, 1])

        def _project(self, x):
            down = np.c_[x[:, 0], np.zeros(len(x))]
            return np.where((x[:, 1] < half._dist(x))[:, None], down, half._project(x))

    target = lambda p: (np.abs(p[:, 0]) <= a) & (p[:, 1] < 1e-6)
    e = sm.estimate_exit_distribution(BM2, HalfDisk(), [0.0, a], target, CFG, 20_000)
    assert abs(e.mean - po.half_disk_harmonic_measure(a, R)) < 4 * e.stderr + 0.01


# --- engine properties -------------------------------------------------------


def test_results_do_not_depend_on_worker_count():
    proc = sb.ProcessSpec(2, sb.preset("bm+stable(0.5)"))
    disc = g.Ball([0.0, 0.0], 1.0)
    one = sm.run_exits(proc, disc, [0.2, 0], CFG.scaled(block_size=500), 2_000, stream=(3,))
    many = sm.run_exits(proc, disc, [0.2, 0], CFG.scaled(block_size=500, workers=3), 2_000, stream=(3,))
    assert one.tau.mean[0] == many.tau.mean[0] and one.tau.m2[0] == many.tau.m2[0]


def test_streams_and_seeds_separate_runs():
    disc = g.Ball([0.0, 0.0], 1.0)
    a = sm.estimate_mean_exit_time(BM2, disc, [0, 0], CFG, 500, stream=(1,))
    b = sm.estimate_mean_exit_time(BM2, disc, [0, 0], CFG, 500, stream=(1,))
    c = sm.estimate_mean_exit_time(BM2, disc, [0, 0], CFG, 500, stream=(2,))
    d = sm.estimate_mean_exit_time(BM2, disc, [0, 0], CFG.scaled(seed=1), 500, stream=(1,))
    assert a.mean == b.mean and a.mean != c.mean and a.mean != d.mean


def test_stream_key_is_stable():
    assert sm.stream_key("cone", 1, 2) == sm.stream_key("cone", 1, 2)
    assert sm.stream_key("cone", 1, 2) != sm.stream_key("cone", 2, 1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=60), st.integers(1, 59))
def test_welford_merge_equals_single_pass(values, cut):
    v = np.array(values)
    cut = min(cut, len(v) - 1)
    merged = sm.Welford.of(v[:cut]).merge(sm.Welford.of(v[cut:]))
    whole = sm.Welford.of(v)
    assert merged.n == whole.n
    assert np.allclose(merged.mean, whole.mean, atol=1e-9)
    assert np.allclose(merged.m2, whole.m2, rtol=1e-9, atol=1e-6)


def test_splitting_preserves_occupation_mean():
    proc = sb.ProcessSpec(2, sb.preset("bm+stable(0.5)"))
    dom = g.cone(math.pi / 4, 1.0)
    x0, y = [0.0, 0.05], [0.0, 0.75]
    f = sm.ball_occupation([y], [0.1])
    plain = sm.run_exits(proc, dom, x0, CFG, 20_000, functional=f)
    split = sm.run_exits(proc, dom, x0, CFG, 5_000, functional=f,
                         splitting=sm.Splitting(np.zeros(2), math.sqrt(2), 2, 0.6))
    p, s = plain.occupation.estimate(), split.occupation.estimate()
    assert abs(p.mean - s.mean) < 4 * math.hypot(p.stderr, s.stderr)
    assert s.stderr < p.stderr


def test_censoring_is_reported():
    s = sm.run_exits(BM2, g.Ball([0.0, 0.0], 1.0), [0, 0], CFG.scaled(max_steps=3), 100)
    assert s.censored_frac > 0.5
    with pytest.raises(sm.CensoringError):
        s.check_censoring()


# --- errors ------------------------------------------------------------------


def test_input_validation():
    disc = g.Ball([0.0, 0.0], 1.0)
    with pytest.raises(sm.SamplerError):
        sm.run_exits(BM2, disc, [2.0, 0.0], CFG, 10)
    with pytest.raises(sm.SamplerError):
        sm.run_exits(BM2, disc, [0.0, 0.0, 0.0], CFG, 10)
    with pytest.raises(sm.SamplerError):
        sm.estimate_green(BM2, disc, [0, 0], [0.1, 0.0], 0.05, CFG, 10)
    with pytest.raises(sm.SamplerError):
        sm.run_exits(BM2, disc, [0.1, 0], CFG, 10, splitting=sm.Splitting(np.zeros(2)))
    with pytest.raises(sm.SamplerError):
        sm.PathConfig(dt=0.0)


# --- manifests and CSV -------------------------------------------------------


def test_manifest_hash_is_content_addressed():
    disc = g.Ball([0.0, 0.0], 1.0)
    a = sm.run_manifest(BM2, disc, CFG)
    b = sm.run_manifest(BM2, disc, CFG)
    c = sm.run_manifest(BM2, disc, CFG.scaled(seed=5))
    assert a["content_hash"] == b["content_hash"] != c["content_hash"]


def test_estimates_csv_round_trips_floats(tmp_path):
    est = sm.Estimate(0.1 + 0.2, 1 / 3, 10, 0.0)
    sm.write_estimates_csv(tmp_path / "e.csv", [("x", 0.5, est)])
    with open(tmp_path / "e.csv", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == sm.CSV_FIELDS
    assert float(rows[1][2]) == 0.1 + 0.2 and float(rows[1][3]) == 1 / 3
