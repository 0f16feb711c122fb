import math

import numpy as np
import pytest
from scipy import stats

import mrwlab.limit_harness as lh
from mrwlab import (
    ModelParams,
    Regime,
    RegimeError,
    RngStreamSpec,
    WeightedSample,
    asclt_measure_critical,
    asclt_measure_diffusive,
    covariance_grid,
    exact_mean_recursion,
    fclt_skeleton,
    fclt_skeletons_batch,
    moment_recursion,
    qsl_functional,
    qsl_functional_batch,
    qsl_target,
    skeleton_steps,
    superdiffusive_limit,
    theoretical_covariance_diffusive,
    walk_checkpoints_batch,
    walk_positions_batch,
    weighted_ks_to_normal,
    weighted_mean_variance,
)

DIFFUSIVE = ModelParams(s=0.5, q=0.5, p=0.5)
CRITICAL = ModelParams(s=0.5, q=0.25, p=0.75)
SUPER = ModelParams(s=0.5, q=0.1, p=0.9)


# ---------------------------------------------------------------- gates


def test_regime_gates():
    spec = RngStreamSpec(1)
    with pytest.raises(RegimeError):
        asclt_measure_diffusive(CRITICAL, 1000, spec)
    with pytest.raises(RegimeError):
        asclt_measure_critical(DIFFUSIVE, 1000, spec)
    with pytest.raises(RegimeError):
        qsl_functional(SUPER, 1000, 1, spec)
    with pytest.raises(RegimeError):
        qsl_functional_batch(SUPER, 1000, 1, [spec])
    with pytest.raises(RegimeError):
        fclt_skeleton(SUPER, 1000, None, spec)
    with pytest.raises(RegimeError):
        superdiffusive_limit(DIFFUSIVE, [100, 200], 10, spec)
    with pytest.raises(RegimeError):
        qsl_target(SUPER, 1, Regime.SUPERDIFFUSIVE)


def test_small_horizon_guards():
    spec = RngStreamSpec(1)
    with pytest.raises(ValueError):
        asclt_measure_diffusive(DIFFUSIVE, 5, spec)
    with pytest.raises(ValueError):
        asclt_measure_critical(CRITICAL, 2, spec)
    with pytest.raises(ValueError):
        qsl_functional(DIFFUSIVE, 2, 1, spec)
    with pytest.raises(ValueError):
        qsl_functional(DIFFUSIVE, 1000, 0, spec)


# ---------------------------------------------------------------- weighted KS


def test_weighted_ks_matches_scipy_for_equal_weights():
    rng = np.random.default_rng(3)
    pts = rng.standard_normal(5000)
    sample = WeightedSample(
        points=pts,
        weights=np.ones_like(pts),
        normalizer=float(len(pts)),
        target_variance=1.0,
        n=len(pts),
    )
    ours = weighted_ks_to_normal(sample)
    theirs = stats.kstest(pts, "norm").statistic
    assert abs(ours - theirs) < 1e-12


def test_weighted_ks_variance_handling():
    pts = np.array([-1.0, 0.0, 1.0])
    sample = WeightedSample(pts, np.ones(3), 3.0, 0.0, 3)
    with pytest.raises(ValueError):
        weighted_ks_to_normal(sample)
    assert weighted_ks_to_normal(sample, variance=1.0) > 0.0


def test_weighted_mean_variance_definition():
    pts = np.array([0.0, 2.0])
    w = np.array([3.0, 1.0])
    sample = WeightedSample(pts, w, 4.0, 1.0, 2)
    mean, var = weighted_mean_variance(sample)
    assert abs(mean - 0.5) < 1e-15
    assert abs(var - (0.75 * 0.25 + 0.25 * 2.25)) < 1e-15


# ---------------------------------------------------------------- measures


def test_diffusive_measure_reconstructs_path():
    n = 200
    spec = RngStreamSpec(11)
    sample = asclt_measure_diffusive(DIFFUSIVE, n, spec)
    assert not sample.histogram
    assert len(sample.points) == n
    pos = walk_positions_batch(DIFFUSIVE, n, [spec])[0]
    k = np.arange(1, n + 1, dtype=np.float64)
    expected = np.sqrt(k) * (pos[1:] / k - 0.5)
    assert np.allclose(sample.points, expected, atol=1e-12)
    assert np.allclose(sample.weights, 1.0 / k, rtol=1e-15)
    assert sample.normalizer == math.log(n)
    assert sample.target_variance == 0.25


def test_critical_measure_reconstructs_path():
    n = 200
    spec = RngStreamSpec(12)
    sample = asclt_measure_critical(CRITICAL, n, spec)
    assert len(sample.points) == n - 1
    pos = walk_positions_batch(CRITICAL, n, [spec])[0]
    k = np.arange(2, n + 1, dtype=np.float64)
    expected = np.sqrt(k / np.log(k)) * (pos[2:] / k - 0.5)
    assert np.allclose(sample.points, expected, atol=1e-12)
    assert np.allclose(sample.weights, 1.0 / (k * np.log(k)), rtol=1e-15)
    assert sample.target_variance == 0.25


def test_diffusive_mass_ratio_tracks_harmonic_sum():
    # weights sum to H_n, so the ratio is 1 + Euler-Mascheroni / log n.
    sample = asclt_measure_diffusive(DIFFUSIVE, 10_000, RngStreamSpec(4))
    expected = 1.0 + np.euler_gamma / math.log(10_000)
    assert abs(sample.mass_ratio() - expected) < 1e-3


def test_critical_mass_ratio_drifts_toward_one():
    ratios = [
        asclt_measure_critical(CRITICAL, n, RngStreamSpec(4)).mass_ratio()
        for n in (1000, 100_000)
    ]
    assert ratios[0] > ratios[1] > 1.0


def test_histogram_mode_agrees_with_raw(monkeypatch):
    n = 50_000
    spec = RngStreamSpec(21)
    raw = asclt_measure_diffusive(DIFFUSIVE, n, spec)
    monkeypatch.setattr(lh, "RAW_POINT_LIMIT", 2000)
    hist = asclt_measure_diffusive(DIFFUSIVE, n, spec)
    assert hist.histogram and len(hist.points) == lh.HISTOGRAM_BINS
    assert abs(hist.weights.sum() - raw.weights.sum()) < 1e-9
    ks_raw = weighted_ks_to_normal(raw)
    ks_hist = weighted_ks_to_normal(hist)
    assert abs(ks_raw - ks_hist) < 0.005
    m_raw, v_raw = weighted_mean_variance(raw)
    m_hist, v_hist = weighted_mean_variance(hist)
    assert abs(m_raw - m_hist) < 0.01
    assert abs(v_raw - v_hist) < 0.01


# ---------------------------------------------------------------- qsl


def test_qsl_single_path_matches_batch():
    for params, n in [(DIFFUSIVE, 5000), (CRITICAL, 5000)]:
        batch = qsl_functional_batch(params, n, 2, [RngStreamSpec(9, i) for i in range(3)])
        for i in range(3):
            single = qsl_functional(params, n, 2, RngStreamSpec(9, i))
            assert abs(single.value - batch[i]) < 1e-12 * max(1.0, abs(batch[i]))


def test_qsl_targets():
    assert abs(qsl_target(DIFFUSIVE, 1, Regime.DIFFUSIVE) - 0.25) < 1e-15
    # r = 2: sigma^4 * 4! / (4 * 2) / (1-2a)^2 with sigma^2 = 1/4
    assert abs(qsl_target(DIFFUSIVE, 2, Regime.DIFFUSIVE) - (0.25**2 * 3.0)) < 1e-15
    assert abs(qsl_target(CRITICAL, 1, Regime.CRITICAL) - 0.25) < 1e-15
    assert abs(qsl_target(CRITICAL, 2, Regime.CRITICAL) - (0.25**2 * 3.0)) < 1e-15


def exact_qsl_expectation(params: ModelParams, n: int, r: int) -> float:
    """E[functional] from the exact moment recursion, r = 1 only."""
    mom = moment_recursion(params, n, 2)
    k = np.arange(1, n + 1, dtype=np.float64)
    c = params.q / (1 - params.alpha)
    sq_dev = (mom[2, 1:] - 2 * c * k * mom[1, 1:] + c**2 * k**2) / k**2
    if params.alpha == 0.5:
        terms = sq_dev[1:] / np.log(k[1:]) ** 2
        return float(terms.sum() / math.log(math.log(n)))
    return float(sq_dev.sum() / math.log(n))


@pytest.mark.parametrize("params", [DIFFUSIVE, CRITICAL], ids=["diffusive", "critical"])
def test_qsl_monte_carlo_matches_exact_expectation(params):
    n, reps = 2000, 400
    values = qsl_functional_batch(params, n, 1, [RngStreamSpec(31, i) for i in range(reps)])
    exact = exact_qsl_expectation(params, n, 1)
    se = values.std(ddof=1) / math.sqrt(reps)
    assert abs(values.mean() - exact) < 5 * se


def test_qsl_result_metadata():
    res = qsl_functional(CRITICAL, 100, 2, RngStreamSpec(1))
    assert res.r == 2 and res.n == 100 and res.regime is Regime.CRITICAL
    assert res.target == qsl_target(CRITICAL, 2, Regime.CRITICAL)


# ---------------------------------------------------------------- skeletons


def test_skeleton_steps_mapping():
    steps = skeleton_steps(1000, (0.25, 0.5, 1.0), Regime.DIFFUSIVE)
    assert np.array_equal(steps, [250, 500, 1000])
    steps = skeleton_steps(1000, (0.5, 0.75, 1.0), Regime.CRITICAL)
    assert np.array_equal(steps, [31, 177, 1000])


def test_skeleton_step_errors():
    with pytest.raises(ValueError):
        skeleton_steps(1000, (0.0001, 0.5), Regime.DIFFUSIVE)
    with pytest.raises(ValueError):
        skeleton_steps(10, (0.5, 0.55), Regime.CRITICAL)
    with pytest.raises(ValueError):
        skeleton_steps(1000, (0.5, 0.5), Regime.DIFFUSIVE)
    with pytest.raises(ValueError):
        skeleton_steps(1000, (), Regime.DIFFUSIVE)


def test_skeleton_endpoint_is_clt_statistic():
    n = 4000
    spec = RngStreamSpec(17)
    skel = fclt_skeleton(DIFFUSIVE, n, None, spec)
    final = walk_checkpoints_batch(DIFFUSIVE, [n], [spec])[0, 0]
    expected = math.sqrt(n) * (final / n - 0.5)
    assert abs(skel.values[-1] - expected) < 1e-12
    assert np.array_equal(skel.grid, np.asarray(lh.DEFAULT_GRID_DIFFUSIVE))


def test_skeleton_batch_shape_and_default_grids():
    specs = [RngStreamSpec(2, i) for i in range(6)]
    skel = fclt_skeletons_batch(CRITICAL, 1000, None, specs)
    assert skel.values.shape == (6, len(lh.DEFAULT_GRID_CRITICAL))
    assert skel.regime is Regime.CRITICAL
    single = fclt_skeleton(CRITICAL, 1000, None, specs[2])
    assert np.allclose(skel.values[2], single.values, atol=1e-12)


def test_degenerate_zero_noise_skeleton_collapses():
    # q = p = 1 makes every step after the first deterministic, so the
    # endpoint value is exactly (X_1 - 1)/sqrt(n) with variance s(1-s)/n,
    # consistent with the identically zero limit kernel.
    params = ModelParams(s=0.5, q=1.0, p=1.0)
    specs = [RngStreamSpec(5, i) for i in range(200)]
    skel = fclt_skeletons_batch(params, 1000, (1.0,), specs)
    assert theoretical_covariance_diffusive(params, 1.0, 1.0) == 0.0
    assert skel.values[:, 0].var() < 1e-3


def test_partial_degenerate_p_one_variance_decays_slowly():
    # p = 1, q = 0.7: zeros still arrive off drawn zeros, and their count
    # grows like n^alpha, so the endpoint variance decays like n^(2 alpha - 1)
    # toward the zero kernel rather than at the usual 1/n rate.
    params = ModelParams(s=0.5, q=0.7, p=1.0)
    specs = [RngStreamSpec(5, i) for i in range(400)]
    v_small = fclt_skeletons_batch(params, 250, (1.0,), specs).values[:, 0].var()
    v_large = fclt_skeletons_batch(params, 4000, (1.0,), specs).values[:, 0].var()
    assert v_large < 0.6 * v_small


# ---------------------------------------------------------------- covariance


def test_covariance_grid_small_run():
    est = covariance_grid(DIFFUSIVE, 2000, None, 4000, RngStreamSpec(77))
    assert np.allclose(est.empirical, est.empirical.T, atol=1e-12)
    for i, t in enumerate(est.grid):
        assert est.theoretical[i, i] == theoretical_covariance_diffusive(DIFFUSIVE, t, t)
    rel = np.abs(est.empirical / est.theoretical - 1.0)
    assert rel.max() < 0.10
    assert np.all(est.standard_errors > 0)


def test_covariance_grid_replica_floor():
    with pytest.raises(ValueError):
        covariance_grid(DIFFUSIVE, 100, None, 10, RngStreamSpec(1))


# ---------------------------------------------------------------- superdiffusive


def test_superdiffusive_limit_against_exact_mean():
    results = superdiffusive_limit(SUPER, [200, 2000], 3000, RngStreamSpec(55))
    means = exact_mean_recursion(SUPER, 2000)
    c = SUPER.q / (1 - SUPER.alpha)
    for res, n in zip(results, (200, 2000)):
        exact_stat_mean = n ** (1 - SUPER.alpha) * (means[n] / n - c)
        assert abs(res.mean - exact_stat_mean) < 5 * res.mean_se
        assert res.variance > 0
        assert res.variance_se > 0
        assert res.samples is None
    assert results[1].cauchy_rms < results[0].cauchy_rms


def test_superdiffusive_keep_samples_consistency():
    results = superdiffusive_limit(SUPER, [300], 500, RngStreamSpec(8), keep_samples=True)
    x = results[0].samples
    assert x is not None and len(x) == 500
    assert abs(results[0].mean - x.mean()) < 1e-12
    assert abs(results[0].variance - x.var(ddof=1)) < 1e-12
    assert abs(results[0].mean_se - math.sqrt(x.var(ddof=1) / 500)) < 1e-12


def test_superdiffusive_argument_checks():
    with pytest.raises(ValueError):
        superdiffusive_limit(SUPER, [200, 100], 100, RngStreamSpec(1))
    with pytest.raises(ValueError):
        superdiffusive_limit(SUPER, [], 100, RngStreamSpec(1))
    with pytest.raises(ValueError):
        superdiffusive_limit(SUPER, [100], 1, RngStreamSpec(1))


# ---------------------------------------------------------------- threading


def test_harness_results_independent_of_threads(monkeypatch):
    import mrwlab.core_process as cp

    monkeypatch.setattr(cp, "REPLICA_BLOCK", 16)
    specs = [RngStreamSpec(3, i) for i in range(50)]
    a = qsl_functional_batch(DIFFUSIVE, 500, 1, specs, threads=1)
    b = qsl_functional_batch(DIFFUSIVE, 500, 1, specs, threads=4)
    assert np.array_equal(a, b)
    sa = fclt_skeletons_batch(CRITICAL, 400, None, specs, threads=1)
    sb = fclt_skeletons_batch(CRITICAL, 400, None, specs, threads=4)
    assert np.array_equal(sa.values, sb.values)
