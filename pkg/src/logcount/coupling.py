"""Ordered maximal coupling of discretized laws and mixing-rate experiments.

Two counts with the same innovation but different scales can be drawn from a
single uniform so that (a) each has its exact marginal law, (b) they coincide
with probability ``1 - d_TV`` (the maximum possible), and (c) the larger
scale never produces the smaller count.  Running two feedback chains with
independent pasts and coupling them from a cut-off time onward turns the
fraction of replicates whose counts ever differ after a gap into a Monte
Carlo upper bound on the mixing coefficient, which can then be compared to
the analytic geometric bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Optional

import numpy as np

from . import rng as _rng
from .errors import ConfigError
from .innovations import DiscretizedLaw, compute_constants
from .process import LOG_SIGMA_LIMIT, ModelParams, theorem1_bound, validate
from .errors import ExplosionError


# ---------------------------------------------------------------------------
# Single coupled draw
# ---------------------------------------------------------------------------

def _dense_coupled(law: DiscretizedLaw, law_prime: DiscretizedLaw, u: np.ndarray,
                   tail: float = 1e-12):
    """Reference construction from explicit pmf tables.

    The uniform is split at the overlap mass: below it both outputs are the
    quantile of the normalized overlap ``min(p, q)``; above it each output is
    the quantile of its normalized residual at the same level, which keeps
    the draw of the stochastically larger law on top.
    """
    k1, p1, _ = law.table(tail)
    k2, p2, _ = law_prime.table(tail)
    m = max(len(p1), len(p2))
    p = np.zeros(m)
    q = np.zeros(m)
    p[: len(p1)] = p1
    q[: len(p2)] = p2
    overlap = np.minimum(p, q)
    omega = float(overlap.sum())
    cum_overlap = np.cumsum(overlap)
    cum_res_p = np.cumsum(p - overlap)
    cum_res_q = np.cumsum(q - overlap)

    u = np.asarray(u, dtype=float)
    merged = u < omega
    x = np.empty(u.shape)
    xp = np.empty(u.shape)
    idx = np.searchsorted(cum_overlap, u[merged], side="left")
    x[merged] = xp[merged] = np.minimum(idx, m - 1)
    v = u[~merged] - omega
    x[~merged] = np.minimum(np.searchsorted(cum_res_p, v, side="left"), m - 1)
    xp[~merged] = np.minimum(np.searchsorted(cum_res_q, v, side="left"), m - 1)
    return x, xp, merged


def _discrete_quantile(base, sigma, u):
    """Smallest k with base.cdf((k+1)/sigma) >= u."""
    return np.maximum(np.ceil(sigma * base.quantile(u) - 1.0), 0.0)


def _first_true(lo: np.ndarray, hi: np.ndarray, pred):
    """Vectorized binary search: smallest k in [lo, hi] with pred(k) true.

    ``pred`` must be monotone (false below some threshold, true at hi).
    """
    lo = lo.astype(float).copy()
    hi = hi.astype(float).copy()
    while np.any(lo < hi):
        mid = np.floor((lo + hi) / 2.0)
        t = pred(mid)
        lo = np.where(t, lo, mid + 1.0)
        hi = np.where(t, mid, hi)
    return lo


def _scaled_coupled(base, sigma: np.ndarray, sigma_prime: np.ndarray, u: np.ndarray):
    """Coupled draw via CDF bisection, one replicate per vector entry.

    Equivalent to the dense table construction whenever the pmf difference
    of the two scalings changes sign once, which holds for scale families
    whose density ratio under rescaling is monotone (all built-in families
    at their default shapes).  Cost is O(log K) CDF evaluations instead of
    O(K) table entries, which makes chain experiments with intensities in
    the thousands feasible.
    """
    sigma = np.asarray(sigma, dtype=float)
    sigma_prime = np.asarray(sigma_prime, dtype=float)
    u = np.asarray(u, dtype=float)
    swap = sigma < sigma_prime
    s_hi = np.where(swap, sigma_prime, sigma)
    s_lo = np.where(swap, sigma, sigma_prime)

    # all masses go through the survival function: CDF differences are pure
    # rounding noise deep in the tail, survival differences keep full
    # relative precision there
    def pmf_ge(k):
        # pmf of the high-scale law >= pmf of the low-scale law at k
        lo_mass = base.sf(k / s_lo) - base.sf((k + 1.0) / s_lo)
        hi_mass = base.sf(k / s_hi) - base.sf((k + 1.0) / s_hi)
        return hi_mass >= lo_mass

    kmax = np.ceil(s_hi * float(base.quantile(1.0 - 1e-13))) + 1.0
    ks = _first_true(np.zeros_like(s_hi), kmax, pmf_ge)
    # crossing index: below ks the low-scale law dominates pointwise
    f_hi_cross = base.cdf(ks / s_hi)
    dtv = base.sf(ks / s_hi) - base.sf(ks / s_lo)
    omega = 1.0 - dtv

    x = np.empty(u.shape)
    merged = u < omega

    low_branch = merged & (u <= f_hi_cross)
    if np.any(low_branch):
        x[low_branch] = _discrete_quantile(base, s_hi[low_branch], u[low_branch])
    high_branch = merged & ~low_branch
    if np.any(high_branch):
        lvl = np.minimum(u[high_branch] + dtv[high_branch], np.nextafter(1.0, 0.0))
        x[high_branch] = _discrete_quantile(base, s_lo[high_branch], lvl)
    x_hi = x.copy()
    x_lo = x.copy()

    res = ~merged
    if np.any(res):
        v = u[res] - omega[res]
        d_r = dtv[res]
        ks_r = ks[res]
        shi_r = s_hi[res]
        slo_r = s_lo[res]
        kmax_r = kmax[res]

        def d_of(k, shi=shi_r, slo=slo_r):
            return base.sf((k + 1.0) / shi) - base.sf((k + 1.0) / slo)

        # residual of the high-scale law lives above the crossing,
        # cumulative mass dtv - D(k), non-decreasing in k
        x_hi[res] = _first_true(ks_r, kmax_r, lambda k: d_of(k) <= d_r - v)
        # residual of the low-scale law lives at or below the crossing,
        # cumulative mass D(k), non-decreasing in k
        x_lo[res] = _first_true(
            np.zeros_like(ks_r), np.maximum(ks_r - 1.0, 0.0), lambda k: d_of(k) >= v
        )

    x_first = np.where(swap, x_lo, x_hi)
    x_second = np.where(swap, x_hi, x_lo)
    return x_first, x_second, merged


def coupled_draw(law: DiscretizedLaw, law_prime: DiscretizedLaw,
                 rng: np.random.Generator, size=None):
    """Draw (X, X', merged) from the ordered maximal coupling.

    Marginals are exact, ``P(X = X') = 1 - d_TV``, and the draw of the law
    with the larger scale is almost surely the larger count.  Scalar unless
    ``size`` is given.
    """
    if law.base != law_prime.base:
        raise ConfigError("coupled_draw requires both laws to share the innovation spec")
    u = rng.random(1 if size is None else size)
    big = max(law.support_bound(), law_prime.support_bound())
    if big <= 200_000:
        x, xp, merged = _dense_coupled(law, law_prime, u)
    else:
        x, xp, merged = _scaled_coupled(
            law.base,
            np.full(u.shape, law.sigma),
            np.full(u.shape, law_prime.sigma),
            u,
        )
    if size is None:
        return float(x[0]), float(xp[0]), bool(merged[0])
    return x, xp, merged


# ---------------------------------------------------------------------------
# Coupled chain experiments
# ---------------------------------------------------------------------------

@dataclass
class CoupledRun:
    """One pair of chains: independent up to the cut-off, coupled afterwards."""

    k: int
    sigma: np.ndarray        # intensities of the first chain, t = 0..k+H
    sigma_prime: np.ndarray
    x: np.ndarray
    x_prime: np.ndarray
    merged: np.ndarray       # per coupled step t = k+1..k+H, True if X_t == X_t'

    def differs(self) -> np.ndarray:
        """Indicator of X_t != X_t' over the coupled steps."""
        return ~self.merged

    def diff_indicator(self, n: int, horizon: int) -> bool:
        """True if the chains differ anywhere in [k+n, k+n+horizon]."""
        return bool(self.differs()[n - 1:n + horizon].any())


@dataclass
class CouplingExperimentResult:
    """Monte Carlo upper-bound estimates of the mixing coefficients.

    ``beta_hat[i]`` is the fraction of replicates whose coupled chains differ
    anywhere in the window [k + horizons[i], k + horizons[i] + truncation].
    Because the window is finite the estimate undershoots the full-horizon
    event by at most ``truncation_bound``; it always estimates an upper bound
    of the mixing coefficient, never the coefficient itself.
    """

    k: int
    truncation: int
    replicates: int
    horizons: np.ndarray
    beta_hat: np.ndarray
    stderr: np.ndarray
    theorem_bound: np.ndarray
    truncation_bound: np.ndarray

    def log_slope(self, min_hits: int = 10):
        """LS slope of ln(beta_hat) over horizons with at least min_hits hits."""
        keep = self.beta_hat >= min_hits / self.replicates
        if keep.sum() < 2:
            return None
        x = self.horizons[keep].astype(float)
        y = np.log(self.beta_hat[keep])
        return float(np.polyfit(x, y, 1)[0])


def _evolve_pair_independent(params: ModelParams, k: int, u_y: np.ndarray,
                             u_c: Optional[np.ndarray]):
    """One chain through times 0..k (vectorized over replicates)."""
    base = params.innovation
    sigma = np.full(u_y.shape[0], float(params.sigma0))
    x = np.floor(sigma * base.quantile(u_y[:, 0]))
    sig_hist = [sigma.copy()]
    x_hist = [x.copy()]
    for t in range(1, k + 1):
        if params.exogenous.kind == "trend":
            c_t = params.c * math.log(t)
        else:
            c_t = params.exogenous.quantile(u_c[:, t - 1])
        log_sigma = params.a * np.log(sigma) + params.b * np.log1p(x) + c_t
        bad = np.abs(log_sigma) > LOG_SIGMA_LIMIT
        if np.any(bad):
            raise ExplosionError(t, float(log_sigma[np.argmax(bad)]))
        sigma = np.exp(log_sigma)
        x = np.floor(sigma * base.quantile(u_y[:, t]))
        sig_hist.append(sigma.copy())
        x_hist.append(x.copy())
    return np.stack(sig_hist, axis=1), np.stack(x_hist, axis=1)


def _coupled_chain_block(params: ModelParams, k: int, horizon: int, master_seed: int,
                         lo: int, hi: int, keep_paths: bool = False):
    """Replicates lo..hi-1 of the pair experiment.

    Uniform budget per replicate: (k+1) innovations per chain for the
    independent phase, then one shared uniform per coupled step; iid
    exogenous adds k draws per chain plus one shared draw per coupled step.
    """
    R = hi - lo
    iid = params.exogenous.kind == "iid"
    n_u = 2 * (k + 1) + horizon + (2 * k + horizon if iid else 0)
    u = np.empty((R, n_u))
    for i, r in enumerate(range(lo, hi)):
        u[i] = _rng.stream(master_seed, _rng.NS_SIM, r).random(n_u)
    ua = u[:, : k + 1]
    ub = u[:, k + 1: 2 * (k + 1)]
    uc = u[:, 2 * (k + 1): 2 * (k + 1) + horizon]
    if iid:
        off = 2 * (k + 1) + horizon
        uca = u[:, off: off + k]
        ucb = u[:, off + k: off + 2 * k]
        ucs = u[:, off + 2 * k:]
    else:
        uca = ucb = ucs = None

    base = params.innovation
    sig_a_hist, x_a_hist = _evolve_pair_independent(params, k, ua, uca)
    sig_b_hist, x_b_hist = _evolve_pair_independent(params, k, ub, ucb)
    sigma_a = sig_a_hist[:, -1].copy()
    sigma_b = sig_b_hist[:, -1].copy()
    x_a = x_a_hist[:, -1].copy()
    x_b = x_b_hist[:, -1].copy()

    merged = np.empty((R, horizon), dtype=bool)
    paths = {"sa": [], "sb": [], "xa": [], "xb": []} if keep_paths else None
    for j in range(horizon):
        t = k + 1 + j
        if iid:
            c_t = params.exogenous.quantile(ucs[:, j])  # shared across the pair
        else:
            c_t = params.c * math.log(t)
        la = params.a * np.log(sigma_a) + params.b * np.log1p(x_a) + c_t
        lb = params.a * np.log(sigma_b) + params.b * np.log1p(x_b) + c_t
        for arr in (la, lb):
            bad = np.abs(arr) > LOG_SIGMA_LIMIT
            if np.any(bad):
                raise ExplosionError(t, float(arr[np.argmax(bad)]))
        sigma_a = np.exp(la)
        sigma_b = np.exp(lb)
        x_a, x_b, m = _scaled_coupled(base, sigma_a, sigma_b, uc[:, j])
        merged[:, j] = m
        if keep_paths:
            paths["sa"].append(sigma_a.copy())
            paths["sb"].append(sigma_b.copy())
            paths["xa"].append(x_a.copy())
            paths["xb"].append(x_b.copy())
    if keep_paths:
        full = {
            "sigma": np.concatenate([sig_a_hist, np.stack(paths["sa"], axis=1)], axis=1),
            "sigma_prime": np.concatenate([sig_b_hist, np.stack(paths["sb"], axis=1)], axis=1),
            "x": np.concatenate([x_a_hist, np.stack(paths["xa"], axis=1)], axis=1),
            "x_prime": np.concatenate([x_b_hist, np.stack(paths["xb"], axis=1)], axis=1),
        }
        return merged, full
    return merged, None


def run_coupled_chains(params: ModelParams, k: int, n_max: int, truncation: int,
                       master_seed: int, replicate: int = 0) -> CoupledRun:
    """One replicate of the pair experiment with full paths retained."""
    validate(params)
    horizon = n_max + truncation
    merged, full = _coupled_chain_block(
        params, k, horizon, master_seed, replicate, replicate + 1, keep_paths=True
    )
    return CoupledRun(
        k=k,
        sigma=full["sigma"][0],
        sigma_prime=full["sigma_prime"][0],
        x=full["x"][0],
        x_prime=full["x_prime"][0],
        merged=merged[0],
    )


def _beta_chunk(params: ModelParams, k: int, n_max: int, truncation: int,
                master_seed: int, lo: int, hi: int) -> np.ndarray:
    merged, _ = _coupled_chain_block(params, k, n_max + truncation, master_seed, lo, hi)
    diff = ~merged
    windows = np.lib.stride_tricks.sliding_window_view(diff, truncation + 1, axis=1)
    return windows.any(axis=2).sum(axis=0).astype(np.int64)


def estimate_beta(params: ModelParams, k: int, n_grid, truncation: int,
                  replicates: int, master_seed: int,
                  threads: int = 1) -> CouplingExperimentResult:
    """Monte Carlo upper-bound estimate of mixing coefficients over a gap grid.

    For each gap n the estimate is the fraction of replicates whose coupled
    chains differ anywhere in [k+n, k+n+truncation].  The analytic decay
    bound and the tail left out by the truncation are evaluated alongside.
    """
    consts = validate(params)
    n_grid = np.asarray(sorted(set(int(n) for n in n_grid)), dtype=int)
    if n_grid[0] < 1:
        raise ConfigError("gaps must be >= 1")
    n_max = int(n_grid[-1])
    worker = partial(_beta_chunk, params, k, n_max, truncation, master_seed)
    parts = _rng.run_chunks(worker, replicates, threads)
    counts = np.zeros(n_max, dtype=np.int64)
    for p in parts:
        counts += p
    sel = counts[n_grid - 1]
    beta = sel / replicates
    stderr = np.sqrt(beta * (1.0 - beta) / replicates)
    bound = np.array([theorem1_bound(params, int(n), consts) for n in n_grid])
    # mass of divergence events beyond the window, from the geometric decay
    # of the post-merge log-scale gap: factor a per silent step
    contraction = params.a + params.b * consts.gamma
    tail_factor = params.a ** (truncation + 1) / (1.0 - params.a) if params.a > 0 else 0.0
    brace = 2.0 * abs(math.log(params.sigma0)) + (
        2.0 * params.b * (consts.p_sup + consts.e_ln_plus)
        + 2.0 * params.exogenous.mean_abs_dev
    ) / (1.0 - params.a - params.b)
    trunc = consts.big_gamma * tail_factor * brace * contraction ** n_grid.astype(float)
    return CouplingExperimentResult(
        k=k,
        truncation=truncation,
        replicates=replicates,
        horizons=n_grid,
        beta_hat=beta,
        stderr=stderr,
        theorem_bound=bound,
        truncation_bound=trunc,
    )
