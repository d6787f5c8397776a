"""Mean-median symmetry statistic and its kernel-density variance estimate.

For one sample Y_1..Y_N the statistic is

    T = (mean - median) / (sqrt(pi/2) * mean |Y - median|),

which is asymptotically N(0, sigma_T^2 / N) when the underlying distribution
is symmetric. sigma_T^2 is estimated as

    sigma_T^2 = 2 / (pi tau^2) * (sigma^2 + 1/(4 f(nu)^2) - tau / f(nu))

with tau = mean - 2 * mean(Y * 1{Y < nu}) and f a Gaussian kernel density
estimate evaluated at the median. A sample is trimmed on the side of the
longer tail whenever sqrt(N) |T| exceeds z_crit * sigma_T.

All functions here are pure and thread-safe.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSampleError, IllConditionedError, ValidationError

SQRT_HALF_PI = math.sqrt(math.pi / 2.0)
GAUSS_NORM = 1.0 / math.sqrt(2.0 * math.pi)

#: floor for the estimated variance of sqrt(N)*T; small samples can push the
#: plug-in formula nonpositive through the -tau/f term
VARIANCE_FLOOR = 1e-8

#: below this density at the median the variance formula is not trustworthy
DENSITY_FLOOR = 1e-12


@dataclass(frozen=True)
class KdeConfig:
    """Gaussian KDE configuration.

    bandwidth=None selects Silverman's rule
    h = 0.9 * min(sigma, IQR/1.34) * N^(-1/5); a positive value fixes h.
    """

    bandwidth: float | None = None

    def __post_init__(self):
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValidationError("fixed bandwidth must be positive")


class TrimDecision(enum.Enum):
    STOP = "stop"
    TRIM_MAX = "trim_max"
    TRIM_MIN = "trim_min"


@dataclass(frozen=True)
class SymmetryStats:
    """All per-sample quantities entering the trim decision."""

    mu_hat: float
    nu_hat: float
    d_hat: float
    sigma2_hat: float
    gamma_hat: float
    tau_hat: float
    f_at_nu: float
    sigmaT2_hat: float
    T: float
    N: int
    variance_clamped: bool = False


def sample_median(values) -> float:
    """Middle order statistic (odd N) or midpoint of the two middle ones."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValidationError("median of empty sample")
    return float(np.median(values))


def silverman_bandwidth(values: np.ndarray) -> float:
    """Silverman's rule on a sorted or unsorted sample.

    Falls back to sigma alone when the IQR is zero; returns 0.0 for constant
    data (callers treat that as ill-conditioned).
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    sigma = float(np.sqrt(np.mean((values - values.mean()) ** 2)))
    q75, q25 = np.percentile(values, [75.0, 25.0])
    iqr = float(q75 - q25)
    scale = min(sigma, iqr / 1.34) if iqr > 0 else sigma
    return 0.9 * scale * n ** (-0.2)


def kde_at(values, point: float, kde: KdeConfig = KdeConfig()) -> float:
    """Gaussian kernel density estimate (1/N) sum K_h(point - Y_j) at a point."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValidationError("KDE of empty sample")
    h = kde.bandwidth if kde.bandwidth is not None else silverman_bandwidth(values)
    if not h > 0:
        raise IllConditionedError("zero KDE bandwidth (constant data)")
    u = (point - values) / h
    return float(GAUSS_NORM * np.mean(np.exp(-0.5 * u * u)) / h)


def _median_sorted(z: np.ndarray) -> float:
    n = z.size
    return float(0.5 * (z[(n - 1) // 2] + z[n // 2]))


def _quantile_sorted(z: np.ndarray, p: float) -> float:
    # linear interpolation between order statistics, as np.percentile does
    pos = (z.size - 1) * p
    i = int(pos)
    frac = pos - i
    if frac == 0.0:
        return float(z[i])
    return float(z[i] * (1.0 - frac) + z[i + 1] * frac)


def stats_from_sorted(z: np.ndarray, kde: KdeConfig = KdeConfig()) -> SymmetryStats:
    """Compute SymmetryStats from an ascending-sorted sample.

    This is the workhorse used by the trimming loop, which maintains sorted
    windows; :func:`symmetry_stats` sorts and delegates here.
    """
    n = z.size
    if n < 2:
        raise ValidationError("symmetry statistics require N >= 2")
    mu = float(z.mean())
    nu = _median_sorted(z)
    abs_dev = float(np.mean(np.abs(z - nu)))
    d = SQRT_HALF_PI * abs_dev
    if d == 0.0:
        raise DegenerateSampleError("all sample values are equal")
    sigma2 = float(np.mean((z - mu) ** 2))
    k = int(np.searchsorted(z, nu, side="left"))
    gamma = float(z[:k].sum()) / n
    tau = mu - 2.0 * gamma

    if kde.bandwidth is not None:
        h = kde.bandwidth
    else:
        sigma = math.sqrt(sigma2)
        iqr = _quantile_sorted(z, 0.75) - _quantile_sorted(z, 0.25)
        scale = min(sigma, iqr / 1.34) if iqr > 0 else sigma
        h = 0.9 * scale * n ** (-0.2)
    if not h > 0:
        raise IllConditionedError("zero KDE bandwidth (constant data)")
    u = (nu - z) / h
    f = float(GAUSS_NORM * np.mean(np.exp(-0.5 * u * u)) / h)
    if f < DENSITY_FLOOR:
        raise IllConditionedError(f"density at median below floor ({f:g})")
    if tau <= 0:
        raise IllConditionedError(f"nonpositive dispersion tau ({tau:g})")

    sigmaT2 = 2.0 / (math.pi * tau * tau) * (sigma2 + 0.25 / (f * f) - tau / f)
    clamped = sigmaT2 < VARIANCE_FLOOR
    if clamped:
        sigmaT2 = VARIANCE_FLOOR
    return SymmetryStats(
        mu_hat=mu,
        nu_hat=nu,
        d_hat=d,
        sigma2_hat=sigma2,
        gamma_hat=gamma,
        tau_hat=tau,
        f_at_nu=f,
        sigmaT2_hat=sigmaT2,
        T=(mu - nu) / d,
        N=n,
        variance_clamped=clamped,
    )


def symmetry_stats(values, kde: KdeConfig = KdeConfig()) -> SymmetryStats:
    """SymmetryStats for an arbitrary (unsorted) sample of size >= 2."""
    z = np.sort(np.asarray(values, dtype=float))
    return stats_from_sorted(z, kde)


def trim_decision(stats: SymmetryStats, z_crit: float = 1.96,
                  sqrt_n: bool = True) -> TrimDecision:
    """Decide whether to stop or trim the larger/smaller tail.

    The default test compares sqrt(N)*T against z_crit * sigma_T, matching
    the asymptotic null distribution of T. sqrt_n=False selects the
    unnormalized comparison |T| > z_crit * sigma_T as a compatibility mode.
    """
    if not z_crit > 0:
        raise ValidationError("z_crit must be positive")
    scale = math.sqrt(stats.N) if sqrt_n else 1.0
    bound = z_crit * math.sqrt(stats.sigmaT2_hat)
    lhs = scale * stats.T
    if lhs > bound:
        return TrimDecision.TRIM_MAX
    if lhs < -bound:
        return TrimDecision.TRIM_MIN
    return TrimDecision.STOP
