import math

import numpy as np
import pytest
from scipy import stats

import logcount as lc
from logcount.coupling import _dense_coupled, _scaled_coupled
from logcount.errors import ConfigError

EXP = lc.Exponential(1.0)
HN = lc.HalfNormal.from_mean(1.0)
PARAMS = lc.ModelParams(a=0.1, b=0.1, c=2.0, innovation=EXP)


def chi2_gof_pvalue(law, draws):
    """Goodness of fit of integer draws against a discretized law."""
    _, pmf, _ = law.table()
    N = len(draws)
    expected = pmf * N
    # pool the tail so every bin keeps expected count >= 5
    tail_len = int(np.searchsorted(np.cumsum(expected[::-1]), 5.0)) + 1
    m = max(len(expected) - tail_len, 1)
    obs = np.bincount(draws.astype(int), minlength=len(pmf)).astype(float)
    obs_pool = np.concatenate([obs[:m], [obs[m:].sum()]])
    exp_pool = np.concatenate([expected[:m], [N - expected[:m].sum()]])
    keep = exp_pool >= 5
    stat = float(((obs_pool[keep] - exp_pool[keep]) ** 2 / exp_pool[keep]).sum())
    return float(stats.chi2.sf(stat, keep.sum() - 1))


# ---------------------------------------------------------------------------
# coupled_draw
# ---------------------------------------------------------------------------

def test_equal_scales_always_merge():
    law = lc.DiscretizedLaw(EXP, 3.0)
    x, xp, merged = lc.coupled_draw(law, law, np.random.default_rng(0), size=5000)
    assert merged.all()
    assert np.array_equal(x, xp)
    assert chi2_gof_pvalue(law, x) > 1e-3


def test_mismatched_bases_rejected():
    with pytest.raises(ConfigError):
        lc.coupled_draw(lc.DiscretizedLaw(EXP, 1.0), lc.DiscretizedLaw(HN, 1.0),
                        np.random.default_rng(0))


def test_merge_frequency_matches_overlap():
    law1, law2 = lc.DiscretizedLaw(EXP, 1.0), lc.DiscretizedLaw(EXP, 2.0)
    _, _, merged = lc.coupled_draw(law1, law2, np.random.default_rng(7), size=1_000_000)
    tv = lc.tv_distance(law1, law2)
    se = math.sqrt(tv * (1 - tv) / 1_000_000)
    assert abs(merged.mean() - (1 - tv)) <= 3 * se


def test_order_preservation_exhaustive():
    law_hi, law_lo = lc.DiscretizedLaw(EXP, 3.0), lc.DiscretizedLaw(EXP, 1.0)
    x, xp, merged = lc.coupled_draw(law_hi, law_lo, np.random.default_rng(3), size=1_000_000)
    assert np.all(x >= xp)
    assert np.all(x[~merged] > xp[~merged])


def test_merge_frequency_random_scale_pairs():
    rng = np.random.default_rng(12)
    for _ in range(20):
        s1, s2 = np.exp(rng.uniform(-1.5, 2.5, size=2))
        law1, law2 = lc.DiscretizedLaw(EXP, float(s1)), lc.DiscretizedLaw(EXP, float(s2))
        _, _, merged = lc.coupled_draw(law1, law2, rng, size=40_000)
        tv = lc.tv_distance(law1, law2)
        se = math.sqrt(max(tv * (1 - tv), 1e-12) / 40_000)
        assert abs(merged.mean() - (1 - tv)) <= 4 * se + 1e-9


@pytest.mark.parametrize("spec,pairs", [
    (EXP, [(1.0, 2.0), (2.0, 1.0), (5.0, 5.5), (0.5, 3.0), (7.0, 7.0)]),
    (HN, [(4.0, 4.4), (1.0, 2.5)]),
    (lc.ChiSquare(3), [(3.0, 2.0), (1.0, 1.2)]),
], ids=["exp", "halfnormal", "chi2"])
def test_fast_path_equals_dense_reference(spec, pairs):
    u = np.linspace(1e-9, 1 - 1e-9, 4001)
    for s1, s2 in pairs:
        law1, law2 = lc.DiscretizedLaw(spec, s1), lc.DiscretizedLaw(spec, s2)
        xd, xpd, md = _dense_coupled(law1, law2, u)
        xs, xps, ms = _scaled_coupled(spec, np.full_like(u, s1), np.full_like(u, s2), u)
        assert np.array_equal(xd, xs)
        assert np.array_equal(xpd, xps)
        assert np.array_equal(md, ms)


def test_fast_path_equals_dense_reference_heavy_tail():
    # the half-Cauchy table cannot be materialized at the default tail;
    # compare against a coarser truncation away from the clipped levels
    spec = lc.HalfCauchy(0.0, 1.0)
    law1, law2 = lc.DiscretizedLaw(spec, 1.0), lc.DiscretizedLaw(spec, 1.5)
    tail = 1e-4
    omega = 1.0 - lc.tv_distance(law1, law2)
    u = np.linspace(1e-6, 0.995, 2001)
    u = u[np.abs(u - omega) > 2 * tail]
    xd, xpd, md = _dense_coupled(law1, law2, u, tail=tail)
    xs, xps, ms = _scaled_coupled(spec, np.full_like(u, 1.0), np.full_like(u, 1.5), u)
    assert np.array_equal(xd, xs)
    assert np.array_equal(xpd, xps)
    assert np.array_equal(md, ms)


def test_marginals_pass_gof_both_coordinates():
    rng = np.random.default_rng(2024)
    law1, law2 = lc.DiscretizedLaw(EXP, 2.0), lc.DiscretizedLaw(EXP, 4.5)
    x, xp, _ = lc.coupled_draw(law1, law2, rng, size=200_000)
    assert chi2_gof_pvalue(law1, x) > 1e-3
    assert chi2_gof_pvalue(law2, xp) > 1e-3


# ---------------------------------------------------------------------------
# coupled chains
# ---------------------------------------------------------------------------

def test_degenerate_recursion_merges_immediately():
    # without feedback the intensities coincide from the first coupled step
    params = lc.ModelParams(a=0.0, b=0.0, c=2.0, innovation=EXP)
    run = lc.run_coupled_chains(params, k=5, n_max=5, truncation=5, master_seed=3)
    assert run.merged.all()
    assert np.array_equal(run.x[6:], run.x_prime[6:])


def test_run_reproducible_and_sign_consistent():
    run1 = lc.run_coupled_chains(PARAMS, k=10, n_max=5, truncation=10, master_seed=42)
    run2 = lc.run_coupled_chains(PARAMS, k=10, n_max=5, truncation=10, master_seed=42)
    assert np.array_equal(run1.x, run2.x)
    assert np.array_equal(run1.merged, run2.merged)
    # coupled draws agree in sign with the intensity gap
    post = slice(11, None)
    dx = run1.x[post] - run1.x_prime[post]
    ds = run1.sigma[post] - run1.sigma_prime[post]
    assert np.all((dx == 0) | (np.sign(dx) == np.sign(ds)))


def test_diff_indicator_window():
    run = lc.run_coupled_chains(PARAMS, k=10, n_max=5, truncation=10, master_seed=42)
    diffs = run.differs()
    for n in range(1, 6):
        assert run.diff_indicator(n, 10) == bool(diffs[n - 1:n + 10].any())


def test_estimate_beta_contract():
    res = lc.estimate_beta(PARAMS, k=20, n_grid=range(1, 9), truncation=30,
                           replicates=3000, master_seed=11)
    assert np.all((res.beta_hat >= 0) & (res.beta_hat <= 1))
    assert np.all(np.diff(res.beta_hat) <= 1e-12)  # nested difference windows
    assert np.all(res.beta_hat <= np.minimum(1.0, res.theorem_bound) + 3 * res.stderr)
    # binomial standard errors
    manual_se = np.sqrt(res.beta_hat * (1 - res.beta_hat) / res.replicates)
    assert np.allclose(res.stderr, manual_se)
    # geometric decay of the analytic pieces
    assert np.allclose(np.diff(np.log(res.theorem_bound)), math.log(0.2), atol=1e-12)
    assert np.all(res.truncation_bound <= res.theorem_bound)


def test_estimate_beta_zero_when_bound_negligible():
    res = lc.estimate_beta(PARAMS, k=20, n_grid=[12, 15], truncation=20,
                           replicates=2000, master_seed=5)
    assert np.all(res.beta_hat == 0.0)


def test_estimate_beta_thread_invariance():
    r1 = lc.estimate_beta(PARAMS, k=8, n_grid=[1, 2, 4], truncation=12,
                          replicates=1500, master_seed=9, threads=1)
    r2 = lc.estimate_beta(PARAMS, k=8, n_grid=[1, 2, 4], truncation=12,
                          replicates=1500, master_seed=9, threads=4)
    assert np.array_equal(r1.beta_hat, r2.beta_hat)


def test_estimate_beta_iid_exogenous_shared_after_cutoff():
    exo = lc.ExogenousSpec(kind="iid", family="normal", mean=0.3, sd=0.1)
    params = lc.ModelParams(a=0.1, b=0.1, c=0.0, innovation=EXP, exogenous=exo)
    res = lc.estimate_beta(params, k=10, n_grid=[1, 3], truncation=15,
                           replicates=1500, master_seed=21)
    assert np.all(res.beta_hat <= np.minimum(1.0, res.theorem_bound) + 3 * res.stderr)
