"""
Distribution fitting for latency samples.

Latency samples are integers, so they are min-max scaled into the open unit
interval before a method-of-moments beta fit. The fit is described by the
Kolmogorov-Smirnov distance to the fitted CDF; no p-value is reported since
the parameters come from the same data.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.stats

from src.errors import (
    DegenerateVarianceError,
    InsufficientDataError,
    MomentInfeasibleError,
    ParameterDomainError,
)

logger = logging.getLogger(__name__)

FIT_REPORT_COLUMNS = ["scenario", "alpha", "beta", "lower", "upper", "ks_stat", "n_samples"]

_FPMIN = 1e-300
_MAX_ITER = 500
_EPS = 1e-15


@dataclass(frozen=True)
class BetaFit:
    alpha: float
    beta: float
    lower: float
    upper: float
    ks_stat: float
    n_samples: int

    def scaled(self, value: float) -> float:
        """Map a latency value onto the fitted unit interval."""
        return (value - self.lower) / (self.upper - self.lower)


@dataclass(frozen=True)
class Histogram:
    bin_edges: List[float]
    counts: List[int]

    @property
    def total(self) -> int:
        return sum(self.counts)


def min_max_scale(samples: Sequence[float]) -> Tuple[List[float], float, float]:
    """
    Scale samples into (0, 1) with half-unit padding on both ends.

    Returns:
        (scaled, lower, upper) with ``lower = min - 0.5`` and ``upper = max + 0.5``
    """
    if len(samples) < 2:
        raise InsufficientDataError(f"need at least 2 samples to scale, got {len(samples)}")
    values = np.asarray(samples, dtype=float)
    low, high = float(values.min()), float(values.max())
    if low == high:
        raise DegenerateVarianceError(f"all {len(samples)} samples equal {low}")
    lower, upper = low - 0.5, high + 0.5
    scaled = (values - lower) / (upper - lower)
    return scaled.tolist(), lower, upper


def beta_from_moments(mean: float, variance: float) -> Tuple[float, float]:
    """Solve the beta mean/variance equations for (alpha, beta)."""
    if not 0.0 < mean < 1.0:
        raise MomentInfeasibleError(f"mean {mean} is outside (0, 1)")
    if variance <= 0.0:
        raise DegenerateVarianceError("sample variance is zero")
    spread = mean * (1.0 - mean)
    if variance >= spread:
        raise MomentInfeasibleError(f"variance {variance} >= m(1-m) = {spread}")
    common = spread / variance - 1.0
    return mean * common, (1.0 - mean) * common


def fit_beta_mom(scaled: Sequence[float]) -> Tuple[float, float]:
    """
    Method-of-moments beta fit on samples inside (0, 1).

    Uses the unbiased sample variance.

    Raises:
        InsufficientDataError: Fewer than two samples
        DegenerateVarianceError: Zero variance
        MomentInfeasibleError: Variance at or above m(1-m)
    """
    if len(scaled) < 2:
        raise InsufficientDataError(f"need at least 2 samples to fit, got {len(scaled)}")
    values = np.asarray(scaled, dtype=float)
    if np.any(values <= 0.0) or np.any(values >= 1.0):
        raise ParameterDomainError("beta fit samples must lie strictly inside (0, 1)")
    return beta_from_moments(float(values.mean()), float(values.var(ddof=1)))


def _check_shape(alpha: float, beta: float):
    if not (alpha > 0 and beta > 0):
        raise ParameterDomainError(f"beta shapes must be positive, got ({alpha}, {beta})")


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Modified Lentz evaluation of the incomplete beta continued fraction."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    logger.warning(f"Incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")
    return h


def regularized_incomplete_beta(x: float, alpha: float, beta: float) -> float:
    """
    Regularized incomplete beta function ``I_x(alpha, beta)``.

    Args:
        x: Evaluation point in [0, 1]
        alpha: First shape, positive
        beta: Second shape, positive

    Returns:
        Value in [0, 1]
    """
    _check_shape(alpha, beta)
    if not 0.0 <= x <= 1.0:
        raise ParameterDomainError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0

    ln_beta = math.lgamma(alpha) + math.lgamma(beta) - math.lgamma(alpha + beta)
    front = math.exp(alpha * math.log(x) + beta * math.log1p(-x) - ln_beta)
    # the fraction converges fastest below the mean; use symmetry above it
    if x < (alpha + 1.0) / (alpha + beta + 2.0):
        value = front * _beta_continued_fraction(alpha, beta, x) / alpha
    else:
        value = 1.0 - front * _beta_continued_fraction(beta, alpha, 1.0 - x) / beta
    return min(1.0, max(0.0, value))


def beta_cdf(x, alpha: float, beta: float) -> np.ndarray:
    """Vectorized ``regularized_incomplete_beta`` over an array of points."""
    points = np.atleast_1d(np.asarray(x, dtype=float))
    return np.array([regularized_incomplete_beta(float(p), alpha, beta) for p in points])


def beta_pdf(x, alpha: float, beta: float) -> np.ndarray:
    _check_shape(alpha, beta)
    return scipy.stats.beta.pdf(np.asarray(x, dtype=float), alpha, beta)


def ks_statistic(scaled: Sequence[float], alpha: float, beta: float) -> float:
    """
    Two-sided Kolmogorov-Smirnov distance between samples and Beta(alpha, beta).

    The statistic is descriptive only.
    """
    _check_shape(alpha, beta)
    if len(scaled) < 1:
        raise InsufficientDataError("need at least 1 sample for the KS statistic")
    values = np.asarray(scaled, dtype=float)
    if np.any(values < 0.0) or np.any(values > 1.0):
        raise ParameterDomainError("KS samples must lie in [0, 1]")
    result = scipy.stats.kstest(values, lambda points: beta_cdf(points, alpha, beta))
    return float(result.statistic)


def fit_latency_samples(samples: Sequence[float]) -> BetaFit:
    """Scale, fit and score latency samples in one pass."""
    scaled, lower, upper = min_max_scale(samples)
    alpha, beta = fit_beta_mom(scaled)
    ks = ks_statistic(scaled, alpha, beta)
    logger.info(f"Beta fit on {len(samples)} samples: alpha={alpha:.4f} beta={beta:.4f} KS={ks:.4f}")
    return BetaFit(alpha=alpha, beta=beta, lower=lower, upper=upper, ks_stat=ks, n_samples=len(samples))


def make_histogram(samples: Sequence[float], bins: int) -> Histogram:
    """
    Equal-width histogram over [min, max] with the last bin right-closed.

    All-equal samples produce one bin of width 1 centred on the value.
    """
    if bins < 1:
        raise ParameterDomainError(f"bins must be at least 1, got {bins}")
    if len(samples) < 1:
        raise InsufficientDataError("need at least 1 sample for a histogram")
    values = np.asarray(samples, dtype=float)
    low, high = float(values.min()), float(values.max())
    if low == high:
        return Histogram(bin_edges=[low - 0.5, low + 0.5], counts=[len(values)])
    counts, edges = np.histogram(values, bins=bins, range=(low, high))
    return Histogram(bin_edges=edges.tolist(), counts=[int(c) for c in counts])


def fit_report_frame(rows: Sequence[Tuple[str, Optional[BetaFit], int]]) -> pd.DataFrame:
    """
    Tabulate fits as ``scenario,alpha,beta,lower,upper,ks_stat,n_samples``.

    A missing fit leaves the numeric fields blank.
    """
    records = []
    for scenario, fit, n_samples in rows:
        if fit is None:
            records.append((scenario, None, None, None, None, None, n_samples))
        else:
            records.append((scenario, fit.alpha, fit.beta, fit.lower, fit.upper, fit.ks_stat, fit.n_samples))
    return pd.DataFrame(records, columns=FIT_REPORT_COLUMNS)
