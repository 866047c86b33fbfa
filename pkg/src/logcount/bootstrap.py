"""Dependent wild bootstrap for the trend statistic.

The statistic ``T_n = sqrt(n) ln(n) (theta_hat - target)`` is approximated by
multiplying the centered log counts with a slowly mixing Gaussian multiplier
process: an AR(1) chain with autocorrelation ``exp(-|s-t|/l_n)``, i.e. a unit
grid sample of an Ornstein-Uhlenbeck path.  Centering uses the moving-window
mean, so serial dependence up to the multiplier range survives into the
bootstrap distribution.  Quantiles of the bootstrap draws give confidence
intervals for the projection target with half-width ``u* / (sqrt(n) ln n)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import partial
from typing import Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from . import rng as _rng
from .errors import ConfigError
from .estimation import TrendFit, nn_means, theta_hat, trend_weights, theta_bar_mc
from .process import ModelParams, simulate_replicate_block, validate


@dataclass(frozen=True)
class BootstrapConfig:
    """Tuning of the dependent wild bootstrap.

    l_n is the multiplier dependence length, N_n the moving-window size of
    the centering estimator, B the number of bootstrap draws and alpha the
    two-sided confidence level complement.
    """

    l_n: float
    N_n: int
    B: int
    alpha: float

    def __post_init__(self):
        if not (self.l_n > 0 and math.isfinite(self.l_n)):
            raise ConfigError(f"l_n must be positive, got {self.l_n}")
        if self.N_n < 1:
            raise ConfigError(f"N_n must be >= 1, got {self.N_n}")
        if self.B < 1:
            raise ConfigError(f"B must be >= 1, got {self.B}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")

    def regime_warnings(self, n: int) -> list[str]:
        """Flag tuning outside the recommended asymptotic regime."""
        out = []
        if self.l_n >= self.N_n:
            out.append(
                f"l_n={self.l_n} >= N_n={self.N_n}: multiplier range should stay "
                "below the centering window"
            )
        rate = self.l_n * self.N_n * math.log(n) ** 2 / n
        if rate >= 1.0:
            out.append(
                f"l_n*N_n*ln(n)^2/n = {rate:.3g} >= 1: centering bias may dominate"
            )
        return out


@dataclass(frozen=True)
class ConfidenceInterval:
    """Two-sided interval for the projection target, centered at theta_hat."""

    lower: float
    upper: float
    level: float
    u_star: float
    theta_hat: float
    half_width: float


def multipliers(n: int, l_n: float, rng: np.random.Generator, size: Optional[int] = None):
    """AR(1) Gaussian multiplier paths with covariance exp(-|s-t|/l_n).

    The first value is standard normal and each step applies
    ``W_t = exp(-1/l_n) W_{t-1} + sqrt(1 - exp(-2/l_n)) eps_t``; every
    marginal is standard normal.  Shape (n,) or (size, n).
    """
    if not l_n > 0:
        raise ConfigError("l_n must be positive")
    phi = math.exp(-1.0 / l_n)
    scale = math.sqrt(-math.expm1(-2.0 / l_n))
    eps = rng.standard_normal((1 if size is None else size, n))
    return _ar1_filter(eps, phi, scale, size)


def _ar1_filter(eps: np.ndarray, phi: float, scale: float, size: Optional[int]):
    v = scale * eps
    v[:, 0] = eps[:, 0]  # unit-variance start
    w = lfilter([1.0], [1.0, -phi], v, axis=1)
    return w[0] if size is None else w


def t_star(fit: TrendFit, cfg: BootstrapConfig, rng: np.random.Generator,
           size: Optional[int] = None, multiplier_draws: Optional[np.ndarray] = None):
    """Bootstrap statistic(s): weighted, window-centered log counts times
    fresh multiplier paths.  Scalar unless ``size`` is given."""
    n = fit.n
    centered = fit.series_transformed - nn_means(fit.series_transformed, cfg.N_n)
    d = trend_weights(n) * centered
    if multiplier_draws is None:
        w = multipliers(n, cfg.l_n, rng, size=size if size is not None else 1)
        if size is None:
            w = w[None, :] if w.ndim == 1 else w
    else:
        w = np.atleast_2d(np.asarray(multiplier_draws, dtype=float))
    vals = w @ d
    return float(vals[0]) if size is None else vals


def t_star_variance(fit: TrendFit, cfg: BootstrapConfig) -> float:
    """Exact conditional variance of the bootstrap statistic.

    Quadratic form ``sum_{s,t} d_s d_t exp(-|s-t|/l_n)`` evaluated by lags;
    the simulation path mirrors it only up to Monte Carlo error, so this is
    the diagnostic of choice for variance-matching checks.
    """
    n = fit.n
    centered = fit.series_transformed - nn_means(fit.series_transformed, cfg.N_n)
    d = trend_weights(n) * centered
    total = float(d @ d)
    h = 1
    while h < n:
        rho = math.exp(-h / cfg.l_n)
        if rho < 1e-17:
            break
        total += 2.0 * rho * float(d[:-h] @ d[h:])
        h += 1
    return total


def _u_star(draws: np.ndarray, alpha: float) -> float:
    """Order statistic at ceil((1 - alpha/2) * B) of the signed draws.

    Clipped at zero so degenerate configurations keep lower <= upper.
    """
    b = len(draws)
    rank = min(max(math.ceil((1.0 - alpha / 2.0) * b), 1), b)
    return max(float(np.sort(draws)[rank - 1]), 0.0)


def confidence_interval(x, cfg: BootstrapConfig, master_seed: int) -> ConfidenceInterval:
    """Bootstrap confidence interval for the projection target.

    Draws B bootstrap statistics from the (master_seed,) stream and inverts
    the symmetric two-sided quantile at level 1 - alpha.
    """
    if cfg.B < 200:
        warnings.warn(f"B={cfg.B} bootstrap draws is low; quantiles will be coarse",
                      stacklevel=2)
    fit = theta_hat(x)
    for msg in cfg.regime_warnings(fit.n):
        warnings.warn(msg, stacklevel=2)
    rng = _rng.stream(master_seed, _rng.NS_BOOT)
    draws = t_star(fit, cfg, rng, size=cfg.B)
    return _interval_from_draws(fit, draws, cfg.alpha)


def _interval_from_draws(fit: TrendFit, draws: np.ndarray, alpha: float) -> ConfidenceInterval:
    u = _u_star(draws, alpha)
    hw = u / (math.sqrt(fit.n) * math.log(fit.n))
    return ConfidenceInterval(
        lower=fit.theta_hat - hw,
        upper=fit.theta_hat + hw,
        level=1.0 - alpha,
        u_star=u,
        theta_hat=fit.theta_hat,
        half_width=hw,
    )


@dataclass(frozen=True)
class CoverageCell:
    l_n: float
    N_n: int
    alpha: float
    coverage: float
    mc_loops: int
    B: int


def _coverage_chunk(params: ModelParams, n: int, cells: tuple, alphas: tuple,
                    B: int, theta_bar: float, master_seed: int,
                    lo: int, hi: int) -> np.ndarray:
    """Covered counts of shape (len(cells), len(alphas)) for loops lo..hi-1.

    Within a loop all cells reuse the same trajectory and the same bootstrap
    innovations; only the AR(1) filtering (per l_n) and the centering window
    (per N_n) differ.  This keeps the per-alpha intervals nested exactly.
    """
    counts = np.zeros((len(cells), len(alphas)), dtype=np.int64)
    weights = trend_weights(n)
    for i in range(lo, hi):
        _, xs = simulate_replicate_block(params, n, master_seed, i, i + 1)
        fit = theta_hat(xs[0, 1:])
        eps = _rng.stream(master_seed, _rng.NS_BOOT, i).standard_normal((B, n))
        w_by_ln: dict[float, np.ndarray] = {}
        d_by_nn: dict[int, np.ndarray] = {}
        for ci, (l_n, N_n) in enumerate(cells):
            if l_n not in w_by_ln:
                phi = math.exp(-1.0 / l_n)
                scale = math.sqrt(-math.expm1(-2.0 / l_n))
                w_by_ln[l_n] = _ar1_filter(eps, phi, scale, size=B)
            if N_n not in d_by_nn:
                centered = fit.series_transformed - nn_means(fit.series_transformed, N_n)
                d_by_nn[N_n] = weights * centered
            draws = w_by_ln[l_n] @ d_by_nn[N_n]
            for ai, alpha in enumerate(alphas):
                ci_obj = _interval_from_draws(fit, draws, alpha)
                if ci_obj.lower <= theta_bar <= ci_obj.upper:
                    counts[ci, ai] += 1
    return counts


def coverage_experiment(params: ModelParams, n: int, cells: Sequence[tuple[float, int]],
                        alphas: Sequence[float], mc_loops: int, B: int,
                        master_seed: int, theta_bar: Optional[float] = None,
                        theta_bar_loops: int = 20_000,
                        threads: int = 1) -> list[CoverageCell]:
    """Fraction of Monte Carlo loops whose interval covers the target.

    The target is estimated once per (params, n) from ``theta_bar_loops``
    independent replicates unless supplied.  One row per (l_n, N_n, alpha).
    """
    validate(params)
    if theta_bar is None:
        t_seed = _rng.derive_seed(master_seed, _rng.NS_TARGET)
        theta_bar = theta_bar_mc(params, n, theta_bar_loops, t_seed, threads).theta_bar
    cells_t = tuple((float(l), int(w)) for l, w in cells)
    alphas_t = tuple(float(a) for a in alphas)
    worker = partial(_coverage_chunk, params, n, cells_t, alphas_t, B, theta_bar, master_seed)
    parts = _rng.run_chunks(worker, mc_loops, threads)
    counts = np.zeros((len(cells_t), len(alphas_t)), dtype=np.int64)
    for p in parts:
        counts += p
    rows = []
    for ci, (l_n, N_n) in enumerate(cells_t):
        for ai, alpha in enumerate(alphas_t):
            rows.append(CoverageCell(
                l_n=l_n, N_n=N_n, alpha=alpha,
                coverage=counts[ci, ai] / mc_loops,
                mc_loops=mc_loops, B=B,
            ))
    return rows
