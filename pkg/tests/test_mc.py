import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from hoppe import exact, mc
from hoppe.errors import ParameterError
from hoppe.kernels import normal, poisson_shift, unit_shift
from hoppe.pointset import barycenter, realize
from hoppe.rng import derive_seed, replicate_rng, stream
from hoppe.running import RunningStats
from hoppe.tree import compute_stats, generate_tree


# ----------------------------------------------------------- running stats


def _two_pass(x):
    x = np.asarray(x, dtype=float)
    m = x.mean()
    d = x - m
    return m, (d**2).sum(), (d**3).sum(), (d**4).sum()


def test_welford_matches_two_pass():
    x = stream(1).lognormal(1.0, 0.8, 1000) + 1e6
    rs = RunningStats()
    for v in x:
        rs.push(v)
    m, m2, m3, m4 = _two_pass(x)
    assert rs.count == 1000
    assert rs.mean == pytest.approx(m, rel=1e-12)
    assert rs.variance == pytest.approx(m2 / 999, rel=1e-9)
    assert rs.m3 == pytest.approx(m3, rel=1e-6)
    assert rs.m4 == pytest.approx(m4, rel=1e-9)
    assert rs.variance == pytest.approx(np.var(x, ddof=1), rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(data=st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=200),
       cuts=st.lists(st.integers(0, 200), max_size=4))
def test_merge_any_partition(data, cuts):
    x = np.array(data)
    bounds = sorted({0, len(x), *[c % (len(x) + 1) for c in cuts]})
    parts = [RunningStats().update(x[a:b]) for a, b in zip(bounds, bounds[1:])]
    left = RunningStats()
    for p in parts:
        left = left.merge(p)
    right = RunningStats()
    for p in reversed(parts):
        right = p.merge(right)
    m, m2, m3, m4 = _two_pass(x)
    scale = max(1.0, m2)
    for acc in (left, right):
        assert acc.count == len(x)
        assert acc.mean == pytest.approx(m, abs=1e-9)
        assert acc.m2 == pytest.approx(m2, rel=1e-9, abs=1e-9 * scale)
        assert acc.m4 == pytest.approx(m4, rel=1e-8, abs=1e-8 * scale**2)


def test_running_stats_small_counts():
    rs = RunningStats()
    assert rs.stderr == math.inf and rs.variance == 0.0
    rs.push(2.0)
    assert rs.mean == 2.0 and rs.variance == 0.0
    assert rs.update([]).count == 1


def test_variance_stderr_against_normal_theory():
    x = stream(2).normal(0, 2.0, 200_000)
    rs = RunningStats().update(x)
    # for normal data SE(s^2) = sigma^2 sqrt(2/(n-1))
    assert rs.variance_stderr == pytest.approx(4.0 * math.sqrt(2 / (x.size - 1)), rel=0.02)


# ---------------------------------------------------------------- estimate


def test_statistic_resolution():
    assert mc.resolve_statistic("U/n²") == "U/n2"
    assert mc.resolve_statistic("S_n variance") == "S2"
    with pytest.raises(ParameterError):
        mc.resolve_statistic("nope")
    with pytest.raises(ParameterError):
        mc.estimate("S", 10, 1.0, 100, 0)
    with pytest.raises(ParameterError):
        mc.estimate("S2", 10, 1.0, 100, 0, kernel=poisson_shift(1.0))
    with pytest.raises(ParameterError):
        mc.estimate("T", 10, 1.0, 1, 0)
    with pytest.raises(ParameterError):
        mc.estimate("T", 10, 0.0, 10, 0)


def test_simulate_chunk_matches_per_replicate_trees():
    raw = mc.simulate_chunk(17, 0.8, 99, 5, 12, kernel=normal(1.0))
    for row, i in enumerate(range(5, 12)):
        rng = replicate_rng(99, i)
        tree = generate_tree(17, 0.8, rng)
        s = compute_stats(tree)
        assert raw["T"][row] == s.total_length and raw["W"][row] == s.wiener
        assert raw["U"][row] == s.u and raw["R2"][row] == s.lca_sum
        assert raw["depth"][row] == s.depths[-1]
        assert raw["S"][row] == pytest.approx(barycenter(realize(tree, normal(1.0), rng)), abs=1e-12)


def test_report_fields_and_json():
    rep = mc.estimate("T", 30, 1.0, 2000, seed=5)
    assert rep.target == exact.expected_T(30, 1.0)
    assert rep.z == pytest.approx((rep.estimate - rep.target) / rep.stderr)
    assert rep.stderr > 0 and rep.replicates == 2000 and rep.seed == 5 and rep.wall_time >= 0
    d = json.loads(rep.to_json())
    assert d["name"] == "T" and d["n"] == 30


def test_threads_bit_exact():
    keys = ["T", "U", "W", "S2"]
    base = mc.estimate_many(keys, 60, 0.7, 20_000, seed=3, kernel=normal(2.0), threads=1)
    for threads in (2, 5):
        other = mc.estimate_many(keys, 60, 0.7, 20_000, seed=3, kernel=normal(2.0), threads=threads)
        for a, b in zip(base, other):
            assert (a.estimate, a.stderr) == (b.estimate, b.stderr)


def test_chunking_does_not_change_replicates(monkeypatch):
    a = mc.estimate("U", 40, 2.0, 3000, seed=8)
    monkeypatch.setattr(mc, "MAX_CHUNK", 7)
    b = mc.estimate("U", 40, 2.0, 3000, seed=8)
    assert a.estimate == pytest.approx(b.estimate, rel=1e-13)
    assert a.stderr == pytest.approx(b.stderr, rel=1e-10)


@pytest.mark.parametrize("statistic,theta", [("T", 1.0), ("depth", 0.5), ("R2", 3.0), ("U/n2", 2.0)])
def test_estimates_against_closed_forms(statistic, theta):
    rep = mc.estimate(statistic, 100, theta, 30_000, seed=derive_seed(4, hash(statistic) % 1000))
    assert abs(rep.z) < 3


def test_barycenter_statistics():
    s = mc.estimate("S", 100, 1.0, 30_000, seed=12, kernel=poisson_shift(2.0))
    assert s.target == pytest.approx(2.0 * exact.expected_T(100, 1.0) / 100)
    assert abs(s.z) < 3
    shift = mc.estimate("S", 50, 2.0, 100, seed=1, kernel=unit_shift())
    assert shift.target == pytest.approx(exact.expected_T(50, 2.0) / 50)
    var = mc.estimate("S_n variance", 100, 1.0, 100_000, seed=13, kernel=normal(1.0))
    assert var.target == pytest.approx(exact.expected_U(100, 1.0) / 100**2)
    assert abs(var.z) < 3


@pytest.mark.slow
def test_u_over_n2_large_n():
    rep = mc.estimate("U/n²", 10_000, 2.0, 10_000, seed=14, threads=4)
    assert rep.target == pytest.approx(exact.expected_U(10_000, 2.0) / 1e8)
    assert abs(rep.target - 2 / 3) < 2e-3
    assert abs(rep.z) < 3


# ----------------------------------------------------------------------- KS


def test_ks_statistic_matches_scipy():
    for seed in range(5):
        x = stream(seed).normal(0.1 * seed, 1.5, 500)
        ours = mc.ks_normal(x, 2.25)
        ref = sps.kstest(x, sps.norm(scale=1.5).cdf)
        assert ours.statistic == pytest.approx(ref.statistic, abs=1e-14)


def test_ks_critical_value():
    assert mc.kolmogorov_critical(1000, 0.01) == pytest.approx(1.6276 / math.sqrt(1000), rel=1e-3)
    assert mc.kolmogorov_critical(100, 0.05) == pytest.approx(1.3581 / 10, rel=1e-3)


def test_ks_calibration_and_power():
    passes = sum(mc.ks_normal(stream(100, r).normal(0, 2.0, 2000), 4.0).passed for r in range(100))
    assert passes >= 98
    fails = sum(not mc.ks_normal(stream(200, r).normal(6.0, 2.0, 2000), 4.0).passed for r in range(20))
    assert fails == 20


def test_ks_rejects():
    with pytest.raises(ParameterError):
        mc.ks_normal(np.zeros(99), 1.0)
    with pytest.raises(ParameterError):
        mc.ks_normal(np.zeros(200), 0.0)


def test_conditional_normality_fixture_trees():
    results = mc.conditional_normality(20, 100, 1.0, 2000, seed=21)
    assert len(results) == 20 and sum(r.passed for r in results) >= 19
    again = mc.conditional_normality(20, 100, 1.0, 2000, seed=21)
    assert [r.statistic for r in results] == [r.statistic for r in again]


# ------------------------------------------------------------ mixing law


def test_mixed_normal_variance_scaling():
    a_mean, a_var = mc.mixed_normal_variance_report(500, 1.0, 1.0, 2000, seed=31)
    b_mean, b_var = mc.mixed_normal_variance_report(500, 1.0, 3.0, 2000, seed=31)
    assert b_mean.estimate == pytest.approx(3 * a_mean.estimate)
    assert b_var.estimate == pytest.approx(9 * a_var.estimate)
    assert b_mean.target == pytest.approx(3.0) and b_var.target == pytest.approx(9 * 2 / 9)
    with pytest.raises(ParameterError):
        mc.mixed_normal_variance_report(500, 1.0, 0.0, 10, seed=0)


def test_mixed_normal_variance_theta_four():
    mean_r, var_r = mc.mixed_normal_variance_report(3000, 4.0, 1.0, 4000, seed=32)
    assert mean_r.target == pytest.approx(2 / 5)
    assert var_r.target == pytest.approx(116 / 3150)
    assert mean_r.passes(3.0, rel=0.05) and var_r.passes(3.0, rel=0.10)


def test_report_passes_rule():
    r = mc.ExperimentReport("x", 1.1, 0.01, 1.0, 10.0, 10, 0, 0.0)
    assert not r.passes(3.0) and r.passes(3.0, rel=0.08)
    assert mc.ExperimentReport("x", 1.0, 0.1, None, None, 10, 0, 0.0).passes()
