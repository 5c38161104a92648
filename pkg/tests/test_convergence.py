import math

import numpy as np
import pytest
from scipy import stats

from radialweb.convergence import (EtaCount, b1_sweep, b2_sweep, beta_family, clt_test,
                                   covariance_check, eta, eta_mean_bound, eta_runs, f_profile,
                                   g_profile, ks_normal, lindeberg_variance, multipath_test,
                                   sample_paths, single_path_value, structural_check, target_level)
from radialweb.errors import DegenerateFitError, ParameterError
from radialweb.levels import LevelSystem, micro_times
from radialweb.streams import RngStream
from radialweb.transforms import PlanarPath, PlanarPathFamily


def test_profiles():
    assert f_profile(0.5) == 0.5
    assert g_profile(0.5) == pytest.approx(1.0)
    assert g_profile(0.25) == pytest.approx(1 / 3)


def test_single_path_small_t_is_zero():
    assert single_path_value(100, 0.005, RngStream(1)) == 0.0
    with pytest.raises(ParameterError):
        single_path_value(100, 0.7, RngStream(1))


def test_single_path_routes_agree():
    # dual route: per-call evaluator against the batched sampler
    n, t = 400, 0.4
    a = np.array([single_path_value(n, t, RngStream(2, i)) for i in range(3000)])
    b = sample_paths(n, [t], 3000, seed=3).values[:, 0]
    assert stats.ks_2samp(a, b).pvalue > 0.01
    assert abs(a.mean()) < 3 * a.std() / math.sqrt(len(a))


def test_lindeberg_variance_matches_samples():
    n = 1000
    ps = sample_paths(n, [0.5], 20000, seed=4)
    emp = ps.values[:, 0].var(ddof=1)
    lin = lindeberg_variance(n, 500, 0.5)
    se = lin * math.sqrt(2 / 20000)
    assert abs(emp - lin) < 4 * se


def test_ks_calibration_on_normal_input():
    rng = np.random.default_rng(5)
    ps = [ks_normal(rng.normal(0, 0.7, size=2000), 0.49)[1] for _ in range(300)]
    assert stats.kstest(ps, "uniform").pvalue > 0.01


def test_clt_report_fields():
    rep = clt_test(1000, 0.5, 2000, seed=6)
    assert rep.predicted_var == pytest.approx(rep.c2_hat * 0.25 * 1.0)
    assert abs(rep.c2_hat - 1.0) < 0.05
    with pytest.raises(DegenerateFitError):
        clt_test(1000, 0.0, 2000, seed=6)
    with pytest.raises(ParameterError):
        clt_test(1000, 0.5, 10, seed=6)


def test_increments_uncorrelated():
    rep = covariance_check(1000, 0.25, 0.5, 20000, seed=7)
    assert abs(rep.increment_cov) < 3 * rep.increment_stderr
    assert abs(rep.empirical - rep.exact) < 4 * rep.stderr


def fam(paths, top=2.0):
    return PlanarPathFamily((0.0, top), [PlanarPath(s, t, x) for s, t, x in paths])


def test_eta_fixtures():
    assert eta(fam([]), 0.0, 1.0, 0, 1).value == 0
    one = fam([(0.0, [0, 1, 2], [0.5, 0.5, 0.5])])
    assert eta(one, 0.0, 1.0, 0, 1).value == 1
    assert eta(one, 0.0, 1.0, 2, 3).value == 0
    early = fam([(0.0, [0, 1, 2], [0.2, 0.5, 0.5]), (0.0, [0, 1, 2], [0.8, 0.5, 0.5])])
    assert eta(early, 0.0, 1.5, 0, 1).value == 1
    late = fam([(0.0, [0, 1, 2], [0.2, 0.3, 0.5]), (0.0, [0, 1, 2], [0.8, 0.7, 0.5])])
    assert eta(late, 0.0, 1.5, 0, 1).value == 2
    assert eta(late, 0.0, 3.0, 0, 1).value == 0


def test_eta_monotone_in_interval():
    rng = np.random.default_rng(8)
    paths = [(0.0, [0, 1, 2], np.sort(rng.normal(size=3))) for _ in range(10)]
    f = fam(paths)
    vals = [eta(f, 0.5, 1.0, -0.5, b).value for b in (-0.2, 0.0, 0.5, 1.0)]
    assert vals == sorted(vals)


def test_strip_rule():
    n, a = 1000, 0.5
    assert target_level(n, a, 0, 1.5) is None
    runs = eta_runs(n, a, 1.5, [0.2], 50, seed=1)
    assert np.all(runs.counts == 0)


def test_eta_kernel_matches_beta_family():
    # dual route: compiled class counting against eta on explicit path families
    n, alpha, t, w = 100, 0.5, 0.5, 0.5
    runs = eta_runs(n, alpha, t, [w], 4000, seed=9)
    k_mean = runs.counts[runs.usable, 0].mean()
    vals = []
    for s in range(500):
        sys = LevelSystem(n, alpha, RngStream(10, s))
        f = beta_family(sys, [0], 0.0, w)
        vals.append(eta(f, 0.0, t, 0.0, w).value)
    vals = np.array(vals)
    se = math.sqrt(runs.counts[:, 0].var() / 4000 + vals.var() / len(vals))
    assert abs(k_mean - vals.mean()) < 4 * se


def test_sweeps_nested_and_monotone():
    eps = [0.1, 0.2, 0.4]
    p2 = b1_sweep(1000, 0.5, 0.5, eps, 3000, seed=11)
    p3 = b2_sweep(1000, 0.5, 0.5, eps, 3000, seed=11)
    assert np.all(p3.p <= p2.p)
    assert np.all(np.diff(p2.p) >= 0) and np.all(np.diff(p3.p) >= 0)
    runs = eta_runs(1000, 0.5, 0.5, eps, 500, seed=12)
    assert np.all(np.diff(runs.counts, axis=1) >= 0)


def test_eta_mean_trivial_interval():
    m = eta_mean_bound(1000, 0.5, 0.0, 0.5, 0.3, 0.3, 500, seed=13)
    assert m.limit == 1.0
    assert 0 <= m.mean <= 1


def test_multipath_same_start_and_ordering():
    rep = multipath_test(1000, 0.5, [(0.0, 0.0), (0.0, 0.0)], [0.1, 0.2], 300, seed=14,
                         c2_samples=1000)
    assert rep.pair_slope == 0.0 and rep.met_fraction == 1.0 and rep.flips == 0
    with pytest.raises(ParameterError):
        multipath_test(1000, 0.5, [(0.5, 0.0), (0.0, 0.0)], [0.1], 10, seed=1)


def test_structural_small():
    rep = structural_check(500, 0.5, 20, 40, 50, seed=15)
    assert rep.pairs == 50 * 190
    assert rep.flips == 0 and rep.splits == 0


def test_eta_count_type():
    e = EtaCount(0.0, 1.0, 0.0, 1.0, 3)
    assert e.value == 3
