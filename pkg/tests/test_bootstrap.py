import math

import numpy as np
import pytest
from scipy import stats

import logcount as lc
from logcount.errors import ConfigError

EXP = lc.Exponential(1.0)
PARAMS = lc.ModelParams(a=0.1, b=0.1, c=2.0, innovation=EXP)


# ---------------------------------------------------------------------------
# multipliers
# ---------------------------------------------------------------------------

def test_multiplier_iid_limit():
    # l_n -> 0 gives coefficients (0, 1): white noise with the same stream
    rng = np.random.default_rng(0)
    w = lc.multipliers(1000, 1e-9, rng)
    rng = np.random.default_rng(0)
    eps = rng.standard_normal((1, 1000))[0]
    assert np.allclose(w, eps, atol=1e-12)


def test_multiplier_lag1_correlation():
    rng = np.random.default_rng(3)
    w = lc.multipliers(1_000_000, 20.0, rng)
    r1 = float(np.corrcoef(w[:-1], w[1:])[0, 1])
    assert abs(r1 - math.exp(-1 / 20)) < 0.002


def test_multiplier_unit_marginal_variance():
    rng = np.random.default_rng(4)
    w = lc.multipliers(400, 15.0, rng, size=4000)
    per_t_var = w.var(axis=0, ddof=1)
    assert np.all(np.abs(per_t_var - 1.0) < 5 * math.sqrt(2 / 4000))


def test_multiplier_covariance_matrix_spd():
    n, l_n = 200, 12.0
    t = np.arange(n)
    cov = np.exp(-np.abs(np.subtract.outer(t, t)) / l_n)
    assert np.allclose(cov, cov.T)
    assert np.linalg.eigvalsh(cov).min() > 0


# ---------------------------------------------------------------------------
# bootstrap statistic
# ---------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ConfigError):
        lc.BootstrapConfig(l_n=0, N_n=10, B=100, alpha=0.1)
    with pytest.raises(ConfigError):
        lc.BootstrapConfig(l_n=5, N_n=0, B=100, alpha=0.1)
    with pytest.raises(ConfigError):
        lc.BootstrapConfig(l_n=5, N_n=10, B=100, alpha=1.5)
    cfg = lc.BootstrapConfig(l_n=30, N_n=20, B=100, alpha=0.1)
    assert cfg.regime_warnings(500)  # l_n >= N_n flagged


def test_t_star_zero_multipliers():
    traj = lc.simulate(PARAMS, 200, 4)
    fit = lc.theta_hat(traj.counts())
    cfg = lc.BootstrapConfig(l_n=10, N_n=20, B=10, alpha=0.1)
    val = lc.t_star(fit, cfg, np.random.default_rng(0),
                    multiplier_draws=np.zeros((1, 200)))
    assert float(np.asarray(val).ravel()[0]) == 0.0


def test_t_star_constant_series():
    fit = lc.theta_hat(np.full(150, 7))
    cfg = lc.BootstrapConfig(l_n=10, N_n=15, B=10, alpha=0.1)
    draws = lc.t_star(fit, cfg, np.random.default_rng(1), size=256)
    assert np.all(draws == 0.0)


def test_t_star_conditionally_centered_gaussian():
    traj = lc.simulate(PARAMS, 500, 8)
    fit = lc.theta_hat(traj.counts())
    cfg = lc.BootstrapConfig(l_n=20, N_n=65, B=10_000, alpha=0.1)
    draws = lc.t_star(fit, cfg, np.random.default_rng(5), size=10_000)
    B = len(draws)
    se_mean = draws.std(ddof=1) / math.sqrt(B)
    assert abs(draws.mean()) <= 3 * se_mean
    skew = float(stats.skew(draws))
    kurt = float(stats.kurtosis(draws, fisher=False))
    assert abs(skew) <= 3 * math.sqrt(6.0 / B)
    assert abs(kurt - 3.0) <= 3 * math.sqrt(24.0 / B)


def test_t_star_simulation_matches_exact_variance():
    traj = lc.simulate(PARAMS, 500, 9)
    fit = lc.theta_hat(traj.counts())
    cfg = lc.BootstrapConfig(l_n=20, N_n=65, B=20_000, alpha=0.1)
    draws = lc.t_star(fit, cfg, np.random.default_rng(6), size=20_000)
    exact = lc.t_star_variance(fit, cfg)
    rel_se = math.sqrt(2.0 / (len(draws) - 1))
    assert draws.var(ddof=1) == pytest.approx(exact, rel=5 * rel_se)


def test_conditional_variance_tracks_asymptotic_sigma2():
    # average exact bootstrap variance over replicates against the limit
    consts = lc.validate(PARAMS)
    target = lc.asymptotic_sigma2(PARAMS, consts)
    cfg = lc.BootstrapConfig(l_n=30, N_n=80, B=10, alpha=0.1)
    vals = []
    for seed in range(12):
        traj = lc.simulate(PARAMS, 2000, 1000 + seed)
        fit = lc.theta_hat(traj.counts())
        vals.append(lc.t_star_variance(fit, cfg))
    avg = float(np.mean(vals))
    assert abs(avg - target) / target < 0.30


# ---------------------------------------------------------------------------
# confidence intervals
# ---------------------------------------------------------------------------

def test_interval_contract():
    traj = lc.simulate(PARAMS, 300, 10)
    x = traj.counts()
    cfg = lc.BootstrapConfig(l_n=15, N_n=40, B=800, alpha=0.1)
    ci = lc.confidence_interval(x, cfg, 77)
    assert ci.lower <= ci.upper
    fit = lc.theta_hat(x)
    assert ci.theta_hat == fit.theta_hat
    hw = ci.u_star / (math.sqrt(fit.n) * math.log(fit.n))
    assert ci.half_width == pytest.approx(hw, rel=1e-12)
    assert ci.lower == pytest.approx(fit.theta_hat - hw, rel=1e-12)


def test_interval_nesting_in_alpha():
    traj = lc.simulate(PARAMS, 300, 11)
    x = traj.counts()
    wide = lc.confidence_interval(x, lc.BootstrapConfig(l_n=15, N_n=40, B=800, alpha=0.05), 5)
    narrow = lc.confidence_interval(x, lc.BootstrapConfig(l_n=15, N_n=40, B=800, alpha=0.10), 5)
    assert wide.lower <= narrow.lower and narrow.upper <= wide.upper


def test_interval_constant_series_zero_width():
    x = np.full(100, 3)
    cfg = lc.BootstrapConfig(l_n=10, N_n=10, B=400, alpha=0.1)
    ci = lc.confidence_interval(x, cfg, 1)
    assert ci.lower == ci.upper == ci.theta_hat


def test_interval_degenerate_draws():
    from logcount.bootstrap import _interval_from_draws

    fit = lc.theta_hat(np.arange(500))
    ci = _interval_from_draws(fit, np.full(100, 2.0), 0.1)
    assert ci.u_star == 2.0
    assert ci.half_width == pytest.approx(2.0 / (math.sqrt(500) * math.log(500)))


def test_low_b_warns():
    x = lc.simulate(PARAMS, 120, 3).counts()
    cfg = lc.BootstrapConfig(l_n=5, N_n=30, B=150, alpha=0.1)
    with pytest.warns(UserWarning, match="bootstrap draws"):
        lc.confidence_interval(x, cfg, 2)


def test_ci_width_shrinks_at_root_n_log_rate():
    # fixed conditional quantile: doubling n rescales the half-width by
    # 1/(sqrt(2) ln(2n)/ln(n)) modulo sampling noise
    cfg = lc.BootstrapConfig(l_n=20, N_n=65, B=2000, alpha=0.1)
    hw = {}
    for n in (500, 1000):
        vals = [lc.confidence_interval(lc.simulate(PARAMS, n, 100 + s).counts(), cfg, s).half_width
                for s in range(8)]
        hw[n] = float(np.mean(vals))
    expected = 1.0 / (math.sqrt(2.0) * math.log(1000) / math.log(500))
    assert hw[1000] / hw[500] == pytest.approx(expected, rel=0.15)


# ---------------------------------------------------------------------------
# coverage machinery
# ---------------------------------------------------------------------------

def test_coverage_experiment_small_run():
    rows = lc.coverage_experiment(PARAMS, 120, cells=[(8.0, 20)], alphas=[0.1, 0.05],
                                  mc_loops=150, B=300, master_seed=99,
                                  theta_bar_loops=2000)
    by_alpha = {r.alpha: r.coverage for r in rows}
    assert set(by_alpha) == {0.1, 0.05}
    # nested intervals make per-cell coverage monotone in the level
    assert by_alpha[0.05] >= by_alpha[0.1]
    assert all(0.5 <= r.coverage <= 1.0 for r in rows)


def test_coverage_thread_invariance():
    kw = dict(cells=[(8.0, 20)], alphas=[0.1], mc_loops=120, B=200,
              master_seed=3, theta_bar_loops=1500)
    r1 = lc.coverage_experiment(PARAMS, 100, threads=1, **kw)
    r2 = lc.coverage_experiment(PARAMS, 100, threads=3, **kw)
    assert [c.coverage for c in r1] == [c.coverage for c in r2]
