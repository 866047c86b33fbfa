"""Innovation distributions and their integer discretizations.

A count variable is produced by scaling a non-negative continuous innovation
``Y`` and taking the integer part, ``X = floor(sigma * Y)``.  The resulting
family of count laws is nearly scale invariant: mean and standard deviation
of ``X`` grow at the same rate in ``sigma``.  This module provides

* the four built-in innovation families (exponential, half-normal,
  half-Cauchy, chi-square) with density, CDF and quantile function,
* the discretized law of ``floor(sigma * Y)`` with pmf/CDF/quantile,
  total variation distance between two scales, and
* the density-derived constants that control contraction and mixing of the
  feedback process built on these laws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import ClassVar, Union

import numpy as np
from scipy import integrate, special

from .errors import ConfigError, NumericError

# Truncation tail for pmf tables and series summation.
TAIL = 1e-12
# Grid size for the monotone-envelope fallback in constant computation.
ENVELOPE_GRID = 10_000
# Largest pmf table materialized by dense routines.
DENSE_MAX = 4_000_000


def _as_float_array(x):
    return np.asarray(x, dtype=float)


# ---------------------------------------------------------------------------
# Innovation families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Exponential:
    """Exponential innovation, density ``rate * exp(-rate*y)`` on [0, inf)."""

    rate: float = 1.0
    family: ClassVar[str] = "exponential"

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ConfigError(f"exponential rate must be positive, got {self.rate}")

    @property
    def monotone_density(self) -> bool:
        return True

    def density(self, y):
        y = _as_float_array(y)
        return np.where(y >= 0, self.rate * np.exp(-self.rate * np.maximum(y, 0.0)), 0.0)

    def cdf(self, y):
        y = _as_float_array(y)
        return np.where(y > 0, -np.expm1(-self.rate * np.maximum(y, 0.0)), 0.0)

    def sf(self, y):
        y = _as_float_array(y)
        return np.where(y > 0, np.exp(-self.rate * np.maximum(y, 0.0)), 1.0)

    def quantile(self, u):
        u = _as_float_array(u)
        return -np.log1p(-u) / self.rate

    def density_slope(self, y):
        y = _as_float_array(y)
        return np.where(y >= 0, -self.rate**2 * np.exp(-self.rate * np.maximum(y, 0.0)), 0.0)

    def critical_points(self) -> tuple[float, ...]:
        return ()


@dataclass(frozen=True)
class HalfNormal:
    """Absolute value of a centered normal with standard deviation ``scale``."""

    scale: float = 1.0
    family: ClassVar[str] = "half_normal"

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ConfigError(f"half-normal scale must be positive, got {self.scale}")

    @classmethod
    def from_mean(cls, mean: float) -> "HalfNormal":
        """Family member with E[Y] = mean (mean = scale * sqrt(2/pi))."""
        return cls(scale=mean * math.sqrt(math.pi / 2.0))

    @property
    def monotone_density(self) -> bool:
        return True

    def density(self, y):
        y = _as_float_array(y)
        nu = self.scale
        val = math.sqrt(2.0 / math.pi) / nu * np.exp(-np.square(np.maximum(y, 0.0)) / (2 * nu * nu))
        return np.where(y >= 0, val, 0.0)

    def cdf(self, y):
        y = _as_float_array(y)
        return np.where(y > 0, special.erf(np.maximum(y, 0.0) / (self.scale * math.sqrt(2.0))), 0.0)

    def sf(self, y):
        y = _as_float_array(y)
        return np.where(y > 0, special.erfc(np.maximum(y, 0.0) / (self.scale * math.sqrt(2.0))), 1.0)

    def quantile(self, u):
        u = _as_float_array(u)
        return self.scale * math.sqrt(2.0) * special.erfinv(u)

    def density_slope(self, y):
        y = _as_float_array(y)
        return np.where(y >= 0, -y / self.scale**2 * self.density(y), 0.0)

    def critical_points(self) -> tuple[float, ...]:
        return ()


@dataclass(frozen=True)
class HalfCauchy:
    """Absolute value of a Cauchy variable with the given location and scale.

    Density ``(s/pi) * [1/((y-m)^2+s^2) + 1/((y+m)^2+s^2)]`` on [0, inf);
    it is non-increasing for location 0 but develops a bump near ``|m|``
    once the location is large relative to the scale.  No moments of order
    one or higher exist, but all logarithmic moments used here are finite.
    """

    location: float = 0.0
    scale: float = 1.0
    family: ClassVar[str] = "half_cauchy"

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ConfigError(f"half-Cauchy scale must be positive, got {self.scale}")
        if not math.isfinite(self.location):
            raise ConfigError("half-Cauchy location must be finite")

    @property
    def monotone_density(self) -> bool:
        m, s = abs(self.location), self.scale
        if m == 0.0:
            return True
        # p'(x) > 0 somewhere on (0, m] means a bump; probe a dense grid.
        xs = np.linspace(0.0, m, ENVELOPE_GRID)[1:]
        return bool(np.all(self.density_slope(xs) <= 0.0))

    def density(self, y):
        y = _as_float_array(y)
        m, s = abs(self.location), self.scale
        yy = np.maximum(y, 0.0)
        val = (s / math.pi) * (1.0 / ((yy - m) ** 2 + s * s) + 1.0 / ((yy + m) ** 2 + s * s))
        return np.where(y >= 0, val, 0.0)

    def cdf(self, y):
        y = _as_float_array(y)
        m, s = abs(self.location), self.scale
        yy = np.maximum(y, 0.0)
        val = (np.arctan((yy - m) / s) + np.arctan((yy + m) / s)) / math.pi
        return np.where(y > 0, val, 0.0)

    def sf(self, y):
        # arctan(z) + arctan(1/z) = pi/2 for z > 0 gives a cancellation-free
        # tail: sf(y) = (arctan(s/(y-m)) + arctan(s/(y+m))) / pi for y > m
        y = _as_float_array(y)
        m, s = abs(self.location), self.scale
        yy = np.maximum(y, m + s)
        stable = (np.arctan(s / (yy - m)) + np.arctan(s / (yy + m))) / math.pi
        return np.where(y > m + s, stable, 1.0 - self.cdf(y))

    def quantile(self, u):
        u = _as_float_array(u)
        m, s = abs(self.location), self.scale
        if m == 0.0:
            return s * np.tan(math.pi * u / 2.0)
        # No closed form when folded off-center: bisect the CDF.
        lo = np.zeros_like(u)
        hi = np.full_like(u, m + s)
        # grow the bracket until it covers all requested levels
        while True:
            need = self.cdf(hi) < u
            if not np.any(need):
                break
            hi = np.where(need, hi * 2.0, hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all((hi - lo) <= 1e-14 * np.maximum(hi, 1.0)):
                break
        return 0.5 * (lo + hi)

    def density_slope(self, y):
        y = _as_float_array(y)
        m, s = abs(self.location), self.scale
        yy = np.maximum(y, 0.0)
        val = -(2.0 * s / math.pi) * (
            (yy - m) / ((yy - m) ** 2 + s * s) ** 2 + (yy + m) / ((yy + m) ** 2 + s * s) ** 2
        )
        return np.where(y >= 0, val, 0.0)

    def critical_points(self) -> tuple[float, ...]:
        m, s = abs(self.location), self.scale
        if m == 0.0 or self.monotone_density:
            return ()
        # sign changes of p' on (0, 2(m+s)); beyond the last bump p decreases
        xs = np.linspace(0.0, 2.0 * (m + s), ENVELOPE_GRID)[1:]
        sl = self.density_slope(xs)
        sign = np.sign(sl)
        idx = np.nonzero(np.diff(sign) != 0)[0]
        points = []
        for i in idx:
            a, b = xs[i], xs[i + 1]
            for _ in range(80):
                mid = 0.5 * (a + b)
                if np.sign(self.density_slope(mid)) == np.sign(self.density_slope(a)):
                    a = mid
                else:
                    b = mid
            points.append(0.5 * (a + b))
        return tuple(points)


@dataclass(frozen=True)
class ChiSquare:
    """Chi-square innovation with ``df`` degrees of freedom (df >= 2).

    Below two degrees of freedom the density is unbounded at the origin,
    which breaks the bounded-density constants used throughout; such
    configurations are rejected.
    """

    df: float = 3.0
    family: ClassVar[str] = "chi_square"

    def __post_init__(self):
        if not (self.df >= 2 and math.isfinite(self.df)):
            raise ConfigError(
                f"chi-square df must be >= 2 (bounded density required), got {self.df}"
            )

    @property
    def monotone_density(self) -> bool:
        return self.df <= 2

    @property
    def mode(self) -> float:
        return max(self.df - 2.0, 0.0)

    def density(self, y):
        y = _as_float_array(y)
        half = self.df / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            logpdf = (half - 1.0) * np.log(np.maximum(y, 0.0)) - np.maximum(y, 0.0) / 2.0
            logpdf -= half * math.log(2.0) + special.gammaln(half)
            val = np.exp(logpdf)
        if self.df == 2:
            val = np.where(y == 0, 0.5, val)
        else:
            val = np.where(y == 0, 0.0, val)
        return np.where(y >= 0, val, 0.0)

    def cdf(self, y):
        y = _as_float_array(y)
        return np.where(y > 0, special.gammainc(self.df / 2.0, np.maximum(y, 0.0) / 2.0), 0.0)

    def sf(self, y):
        y = _as_float_array(y)
        return np.where(y > 0, special.gammaincc(self.df / 2.0, np.maximum(y, 0.0) / 2.0), 1.0)

    def quantile(self, u):
        u = _as_float_array(u)
        return 2.0 * special.gammaincinv(self.df / 2.0, u)

    def density_slope(self, y):
        y = _as_float_array(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = self.density(y) * ((self.df / 2.0 - 1.0) / np.maximum(y, np.finfo(float).tiny) - 0.5)
        return np.where(y > 0, val, 0.0)

    def critical_points(self) -> tuple[float, ...]:
        return (self.mode,) if self.df > 2 else ()


InnovationSpec = Union[Exponential, HalfNormal, HalfCauchy, ChiSquare]

_FAMILIES = {
    "exponential": Exponential,
    "half_normal": HalfNormal,
    "half_cauchy": HalfCauchy,
    "chi_square": ChiSquare,
}


def innovation_from_json(obj: dict) -> InnovationSpec:
    """Build an innovation spec from ``{"family": ..., <params>}``."""
    if not isinstance(obj, dict) or "family" not in obj:
        raise ConfigError("innovation must be an object with a 'family' key")
    kwargs = {k: v for k, v in obj.items() if k != "family"}
    family = obj["family"]
    if family not in _FAMILIES:
        raise ConfigError(f"unknown innovation family {family!r}; expected one of {sorted(_FAMILIES)}")
    try:
        return _FAMILIES[family](**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for innovation family {family!r}: {exc}") from None


def innovation_to_json(spec: InnovationSpec) -> dict:
    out = {"family": spec.family}
    for name in spec.__dataclass_fields__:
        out[name] = getattr(spec, name)
    return out


def sample_y(spec: InnovationSpec, rng: np.random.Generator, size=None):
    """Inverse-transform draw(s) of the innovation ``Y``."""
    u = rng.random() if size is None else rng.random(size)
    q = spec.quantile(u)
    return float(q) if size is None else q


# ---------------------------------------------------------------------------
# Density-derived constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistributionConstants:
    """Constants of an innovation density used by contraction and mixing bounds.

    gamma      integral of the running supremum ``sup{p(y): y >= x}``; always
               >= 1, and exactly 1 for non-increasing densities.  It is the
               amplification factor that converts a log-scale gap into an
               expected gap of the log counts.
    big_gamma  converts a log-scale gap into total variation distance of the
               discretized laws: 1 for non-increasing densities, else
               ``(1 + int x|p'(x)| dx) / 2``.
    p_sup      supremum of the density.
    e_ln_plus  ``E max(ln Y, 0)``.
    var_ln_y   variance of ``ln Y``.
    """

    gamma: float
    big_gamma: float
    p_sup: float
    e_ln_plus: float
    var_ln_y: float


def _quad(fn, lo, hi, *, points=None) -> float:
    val, err = integrate.quad(fn, lo, hi, epsabs=1e-10, epsrel=1e-10, limit=400, points=points)
    if not math.isfinite(val) or err > 1e-6:
        raise NumericError(
            f"quadrature failed on [{lo}, {hi}]: value={val!r}, abserr={err!r}"
        )
    return val


def _slope_abs_integral(spec: InnovationSpec) -> float:
    """``int_0^inf x |p'(x)| dx`` via closed segment sums between sign changes.

    On a segment where p is monotone, ``int x p'(x) dx = [x p(x)] - deltaF``,
    so only the critical points of the density are needed.
    """
    pts = [0.0, *spec.critical_points(), math.inf]
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        fa = float(spec.cdf(a)) if a > 0 else 0.0
        fb = float(spec.cdf(b)) if math.isfinite(b) else 1.0
        xa = a * float(spec.density(a)) if a > 0 else 0.0
        xb = b * float(spec.density(b)) if math.isfinite(b) else 0.0
        total += abs((xb - xa) - (fb - fa))
    return total


def _sup_envelope_integral(spec: InnovationSpec) -> float:
    """``gamma`` for a non-monotone density: grid envelope plus analytic tail."""
    pts = spec.critical_points()
    x_last = pts[-1] if pts else 0.0
    if x_last == 0.0:
        return 1.0
    xs = np.linspace(0.0, x_last, ENVELOPE_GRID)
    dens = spec.density(xs)
    envelope = np.maximum.accumulate(dens[::-1])[::-1]
    head = float(np.trapezoid(envelope, xs))
    # beyond the last critical point the density decreases, so the running
    # supremum equals the density itself and integrates to the tail mass
    return head + (1.0 - float(spec.cdf(x_last)))


def _p_sup(spec: InnovationSpec) -> float:
    candidates = [float(spec.density(0.0))]
    for x in spec.critical_points():
        candidates.append(float(spec.density(x)))
    if isinstance(spec, ChiSquare) and spec.df > 2:
        candidates.append(float(spec.density(spec.mode)))
    return max(candidates)


@lru_cache(maxsize=None)
def compute_constants(spec: InnovationSpec) -> DistributionConstants:
    """Compute all density-derived constants of an innovation spec."""
    if spec.monotone_density:
        gamma = 1.0
        big_gamma = 1.0
    else:
        if isinstance(spec, ChiSquare):
            m = spec.mode
            gamma = m * float(spec.density(m)) + (1.0 - float(spec.cdf(m)))
        else:
            gamma = _sup_envelope_integral(spec)
        big_gamma = 0.5 * (1.0 + _slope_abs_integral(spec))

    e_ln_plus = _quad(lambda y: math.log(y) * float(spec.density(y)), 1.0, math.inf)
    m1 = _quad(lambda y: math.log(y) * float(spec.density(y)), 0.0, 1.0) + \
        _quad(lambda y: math.log(y) * float(spec.density(y)), 1.0, math.inf)
    m2 = _quad(lambda y: math.log(y) ** 2 * float(spec.density(y)), 0.0, 1.0) + \
        _quad(lambda y: math.log(y) ** 2 * float(spec.density(y)), 1.0, math.inf)
    var_ln_y = m2 - m1 * m1
    if var_ln_y <= 0 or not math.isfinite(var_ln_y):
        raise NumericError(f"variance of ln(Y) came out as {var_ln_y!r}")
    return DistributionConstants(
        gamma=gamma,
        big_gamma=big_gamma,
        p_sup=_p_sup(spec),
        e_ln_plus=e_ln_plus,
        var_ln_y=var_ln_y,
    )


# ---------------------------------------------------------------------------
# Discretized law of floor(sigma * Y)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscretizedLaw:
    """Law of ``X = floor(sigma * Y)`` on the non-negative integers."""

    base: InnovationSpec
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ConfigError(f"discretization scale must be positive, got {self.sigma}")

    def pmf(self, k):
        k = _as_float_array(k)
        lo = self.base.cdf(np.maximum(k, 0.0) / self.sigma)
        hi = self.base.cdf((np.maximum(k, 0.0) + 1.0) / self.sigma)
        return np.where(k >= 0, hi - lo, 0.0)

    def cdf(self, k):
        k = _as_float_array(k)
        return np.where(k >= 0, self.base.cdf((np.floor(np.maximum(k, 0.0)) + 1.0) / self.sigma), 0.0)

    def sf(self, k):
        k = _as_float_array(k)
        return np.where(k >= 0, self.base.sf((np.floor(np.maximum(k, 0.0)) + 1.0) / self.sigma), 1.0)

    def pmf_tail(self, k):
        """pmf evaluated through the survival function; stable deep in the tail."""
        k = _as_float_array(k)
        lo = self.base.sf(np.maximum(k, 0.0) / self.sigma)
        hi = self.base.sf((np.maximum(k, 0.0) + 1.0) / self.sigma)
        return np.where(k >= 0, lo - hi, 0.0)

    def quantile(self, u):
        """Smallest k with CDF(k) >= u."""
        q = self.sigma * self.base.quantile(u)
        return np.maximum(np.ceil(q - 1.0), 0.0)

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.random() if size is None else rng.random(size)
        x = np.floor(self.sigma * self.base.quantile(u))
        return float(x) if size is None else x

    def support_bound(self, tail: float = TAIL) -> int:
        """k such that the mass above k is below ``tail``."""
        return int(math.ceil(self.sigma * float(self.base.quantile(1.0 - tail))))

    def table(self, tail: float = TAIL):
        """(k grid, pmf values, cumulative values) up to the tail bound."""
        return _law_table(self.base, float(self.sigma), float(tail))


@lru_cache(maxsize=64)
def _law_table(base: InnovationSpec, sigma: float, tail: float):
    law = DiscretizedLaw(base, sigma)
    kmax = law.support_bound(tail)
    if kmax > DENSE_MAX:
        raise NumericError(
            f"pmf table of {kmax + 1} entries exceeds the dense limit; "
            "use the scale-aware routines for heavy-tailed bases"
        )
    ks = np.arange(kmax + 1, dtype=float)
    cdf = base.cdf((ks + 1.0) / sigma)
    pmf = np.diff(np.concatenate(([0.0], cdf)))
    pmf.setflags(write=False)
    cdf.setflags(write=False)
    ks.setflags(write=False)
    return ks, pmf, cdf


# ---------------------------------------------------------------------------
# Total variation distance
# ---------------------------------------------------------------------------

def tv_distance(law1: DiscretizedLaw, law2: DiscretizedLaw) -> float:
    """Total variation distance ``0.5 * sum_k |p1(k) - p2(k)]`` of two count laws.

    Both laws must share the innovation spec.  Light-tailed bases are summed
    densely past the 1 - 1e-12 quantile; for heavy tails the sum switches to
    geometric blocks whose contribution is evaluated in closed form through
    the CDF once the sign of the pmf difference stabilizes.
    """
    if law1.base != law2.base:
        raise ConfigError("tv_distance requires both laws to share the innovation spec")
    if law1.sigma == law2.sigma:
        return 0.0
    base = law1.base
    s_max = max(law1.sigma, law2.sigma)
    k_full = int(math.ceil(s_max * float(base.quantile(1.0 - TAIL))))
    if k_full <= DENSE_MAX:
        ks = np.arange(k_full + 1, dtype=float)
        acc = float(np.abs(law1.pmf(ks) - law2.pmf(ks)).sum())
        acc += abs(float(law1.sf(k_full)) - float(law2.sf(k_full)))
        return 0.5 * acc

    # Heavy-tailed base: dense head, then doubling blocks with sign probes.
    k0 = min(int(math.ceil(s_max * float(base.quantile(1.0 - 1e-4)))), DENSE_MAX)
    ks = np.arange(k0 + 1, dtype=float)
    acc = float(np.abs(law1.pmf(ks) - law2.pmf(ks)).sum())
    k = k0
    slack = 0.0
    while True:
        sf1, sf2 = float(law1.sf(k)), float(law2.sf(k))
        if max(sf1, sf2) < TAIL or k > 1e17:
            acc += abs(sf1 - sf2)
            break
        k2 = 2 * k
        probes = np.unique(np.round(np.geomspace(k + 1, k2, 9)).astype(np.int64)).astype(float)
        diffs = law1.pmf_tail(probes) - law2.pmf_tail(probes)
        d1 = float(law1.sf(k)) - float(law1.sf(k2))
        d2 = float(law2.sf(k)) - float(law2.sf(k2))
        if np.all(diffs >= 0) or np.all(diffs <= 0):
            acc += abs(d1 - d2)
        elif k2 <= DENSE_MAX:
            blk = np.arange(k + 1, k2 + 1, dtype=float)
            acc += float(np.abs(law1.pmf(blk) - law2.pmf(blk)).sum())
        else:
            acc += abs(d1 - d2)
            slack += 2.0 * min(abs(d1), abs(d2))
        k = k2
    if slack > 1e-9:
        raise NumericError(f"tv_distance tail-sign ambiguity leaves error {slack:.3g} > 1e-9")
    return 0.5 * acc


@dataclass(frozen=True)
class TVBoundRow:
    sigma: float
    sigma_prime: float
    tv: float
    bound: float
    slack: float


@dataclass(frozen=True)
class TVBoundReport:
    big_gamma: float
    rows: tuple[TVBoundRow, ...]

    @property
    def max_slack(self) -> float:
        return max(r.slack for r in self.rows)

    @property
    def min_slack(self) -> float:
        return min(r.slack for r in self.rows)


def tv_bound_check(spec: InnovationSpec, sigma_grid, *, tolerance: float = 1e-9) -> TVBoundReport:
    """Check ``tv(P_s, P_s') <= big_gamma * |ln s - ln s'|`` over a grid.

    ``sigma_grid`` is either a flat list of scales (all unordered pairs are
    formed) or an explicit list of (sigma, sigma') pairs.  A violation beyond
    ``tolerance`` raises NumericError.
    """
    grid = list(sigma_grid)
    if grid and np.ndim(grid[0]) == 0:
        pairs = [(float(a), float(b)) for i, a in enumerate(grid) for b in grid[i:]]
    else:
        pairs = [(float(a), float(b)) for a, b in grid]
    big_gamma = compute_constants(spec).big_gamma
    rows = []
    for s, sp in pairs:
        tv = tv_distance(DiscretizedLaw(spec, s), DiscretizedLaw(spec, sp))
        bound = big_gamma * abs(math.log(s) - math.log(sp))
        rows.append(TVBoundRow(sigma=s, sigma_prime=sp, tv=tv, bound=bound, slack=bound - tv))
    report = TVBoundReport(big_gamma=big_gamma, rows=tuple(rows))
    if report.min_slack < -tolerance:
        worst = min(rows, key=lambda r: r.slack)
        raise NumericError(
            "total variation bound violated: "
            f"tv={worst.tv!r} > bound={worst.bound!r} at sigma=({worst.sigma}, {worst.sigma_prime})"
        )
    return report
