import numpy as np
import pytest

from raplasso import bench
from raplasso.bench import (BenchConfig, contraction_probe, delta_l1, f_score,
                            kfold_cv_lambda, run_replications, stepwise_cv_lambda)
from raplasso.simgen import RegimeSpec, sample_regime
from raplasso.streaming_stats import WeightedMoments


def noise_dataset(seed, n=200, p=10):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, p)), rng.standard_normal(n)


def signal_dataset(seed, n=200, p=10, k=3):
    rng = np.random.default_rng(seed)
    beta = np.zeros(p)
    beta[rng.choice(p, k, replace=False)] = rng.standard_normal(k)
    X = rng.standard_normal((n, p))
    return X, X @ beta + rng.standard_normal(n)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def test_f_score_cases():
    assert f_score([1, 2, 3], [1, 2, 3]) == 1.0
    assert f_score([], [1, 2]) == 0.0
    assert f_score([1, 2], []) == 0.0
    assert f_score([], []) == 1.0
    # precision 0.5, recall 1 -> 2/3
    assert f_score([1, 2], [1]) == pytest.approx(2.0 / 3.0)


def test_delta_l1_cases():
    assert delta_l1([1.0, -1.0], [0.5, 0.0]) == pytest.approx(1.5)
    assert delta_l1([1.0, 2.0], [1.0, 2.0]) == 0.0
    a, b = np.array([0.3, -0.2]), np.array([1.0, 0.1])
    assert delta_l1(a, b) == -delta_l1(b, a)
    with pytest.raises(ValueError):
        delta_l1([1.0], [1.0, 2.0])


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------

def test_cv_on_pure_noise_selects_heavy_shrinkage():
    X, y = noise_dataset(0)
    lam = kfold_cv_lambda(X, y, "gaussian", k=10, grid_size=50)
    top = np.max(np.abs(X.T @ y)) / y.shape[0]
    # within the top decile of the log grid
    grid = np.geomspace(top, 1e-3 * top, 50)
    assert lam >= grid[4]


def test_cv_duplicated_dataset_invariance():
    X, y = signal_dataset(1)
    lam = kfold_cv_lambda(X, y, "gaussian")
    lam_dup = kfold_cv_lambda(np.vstack([X, X]), np.concatenate([y, y]), "gaussian")
    # per-unit-weight selection is scale-free in n up to fold boundaries
    assert lam_dup == pytest.approx(lam, rel=0.35)


def test_cv_grid_of_size_one_returns_top():
    X, y = signal_dataset(2)
    lam = kfold_cv_lambda(X, y, "gaussian", grid_size=1)
    assert lam == pytest.approx(np.max(np.abs(X.T @ y)) / y.shape[0])


def test_cv_validates_inputs():
    X, y = signal_dataset(3, n=5)
    with pytest.raises(ValueError):
        kfold_cv_lambda(X, y, k=10)
    with pytest.raises(ValueError):
        kfold_cv_lambda(X, y, k=1)
    with pytest.warns(UserWarning):
        kfold_cv_lambda(np.random.default_rng(0).standard_normal((30, 3)),
                        np.ones(30), k=3)


def test_cv_binomial_runs():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((120, 5))
    y = (rng.random(120) < 1.0 / (1.0 + np.exp(-X[:, 0]))).astype(float)
    lam = kfold_cv_lambda(X, y, "binomial", k=5, grid_size=20)
    assert lam > 0.0


def test_stepwise_single_segment_equals_kfold():
    X, y = signal_dataset(5)
    lams = stepwise_cv_lambda(X, y, [], "gaussian")
    assert lams.shape == (1,)
    assert lams[0] == kfold_cv_lambda(X, y, "gaussian")


def test_stepwise_short_segment_rejected():
    X, y = signal_dataset(6, n=30)
    with pytest.raises(ValueError):
        stepwise_cv_lambda(X, y, [25], k=10)


def test_stepwise_sparse_regime_gets_larger_penalty():
    # dense / sparse / dense piecewise streams: the middle per-observation
    # penalty should be the largest in the median over seeds
    from raplasso.simgen import make_piecewise_stream
    mids, outers = [], []
    for seed in range(9):
        specs = [RegimeSpec(p=10, rho=rho, duration=100, seed=seed)
                 for rho in (0.8, 0.2, 0.8)]
        stream = make_piecewise_stream(specs)
        X = np.array([s.x for s in stream])
        y = np.array([s.y for s in stream])
        lams = stepwise_cv_lambda(X, y, [100, 200], "gaussian", k=10, grid_size=30)
        mids.append(lams[1])
        outers.append(max(lams[0], lams[2]))
    assert np.median(mids) > np.median(outers)


# ---------------------------------------------------------------------------
# replication harness
# ---------------------------------------------------------------------------

def test_nonstationary_single_rep_summary():
    cfg = BenchConfig(preset="nonstationary", family="gaussian", seed=0,
                      regime_len=30, grid_size=15)
    res = run_replications(cfg, 1)
    assert set(res.arms) == set(bench.ARMS)
    for arm in bench.ARMS:
        s = res.arms[arm].summary
        assert s.n_reps == 1
        assert s.se_loss is None and s.se_f is None
        assert np.isfinite(s.mean_loss)
        assert 0.0 <= s.mean_f <= 1.0
        assert res.arms[arm].lam_traces.shape == (1, 90)
    assert res.changepoints == (30, 60)


def test_harness_reproducible():
    cfg = BenchConfig(preset="nonstationary", family="gaussian", seed=3,
                      regime_len=20, grid_size=10)
    r1 = run_replications(cfg, 2)
    r2 = run_replications(cfg, 2)
    for arm in bench.ARMS:
        assert np.array_equal(r1.arms[arm].lam_traces, r2.arms[arm].lam_traces)
        assert r1.arms[arm].summary.mean_loss == r2.arms[arm].summary.mean_loss


def test_stationary_preset_runs():
    cfg = BenchConfig(preset="stationary", family="gaussian", seed=1,
                      p_values=(10,), n_obs=60, grid_size=15)
    res = run_replications(cfg, 3)
    assert res.deltas[10].shape == (3,)
    assert np.all(np.isfinite(res.deltas[10]))
    assert np.all(res.cv_norms[10] >= 0.0)


def test_zero_epsilon_degenerates_to_fixed_lambda0():
    cfg = BenchConfig(preset="nonstationary", family="gaussian", seed=2,
                      regime_len=20, grid_size=10, epsilon=0.0,
                      lam0_range=(0.1, 0.1))
    res = run_replications(cfg, 1)
    lam = res.arms["rap"].lam_traces[0]
    assert np.all(lam == 0.1)  # a fixed-penalty streaming lasso


def test_config_validation():
    with pytest.raises(ValueError):
        BenchConfig(preset="weird")
    with pytest.raises(KeyError):
        BenchConfig(preset="stationary", family="poisson")
    with pytest.raises(ValueError):
        run_replications(BenchConfig(), 0)


# ---------------------------------------------------------------------------
# contraction probe
# ---------------------------------------------------------------------------

def probe_instance(seed, p=6, n=80):
    rng = np.random.default_rng(seed)
    beta = np.zeros(p)
    beta[:2] = [1.0, -0.5]
    m = WeightedMoments(p, 1.0)
    for _ in range(n):
        x = rng.standard_normal(p)
        m.update(x, float(x @ beta + 0.5 * rng.standard_normal()))
    return m, rng.standard_normal(p), float(rng.standard_normal())


def test_probe_zero_epsilon_is_identity():
    m, x_new, y_new = probe_instance(0)
    rep = contraction_probe(m, x_new, y_new, epsilon=0.0, n_pairs=40, n_orbit=50)
    assert rep.n_same_set > 0
    assert np.all(rep.ratios == 1.0)
    assert rep.orbit_within_bounds


def test_probe_small_epsilon_contracts():
    m, x_new, y_new = probe_instance(1)
    rep = contraction_probe(m, x_new, y_new, epsilon=1e-3, n_pairs=60, n_orbit=200)
    assert rep.n_same_set > 0
    assert rep.n_contracting == rep.n_same_set
    assert rep.max_ratio < 1.0
    assert rep.orbit_within_bounds


def test_probe_orbit_bounded_for_larger_epsilon():
    m, x_new, y_new = probe_instance(2)
    rep = contraction_probe(m, x_new, y_new, epsilon=0.5, n_pairs=20, n_orbit=500)
    assert rep.orbit_within_bounds
