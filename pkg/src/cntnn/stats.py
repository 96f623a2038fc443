"""Distribution summaries shared by the aggregation and comparison layers:
equal-width histograms, population moment summaries, Pearson correlation,
and the exact two-sample Kolmogorov-Smirnov statistic.
"""

import numpy as np

from .errors import MetricError


def histogram(values, bins=100):
    """Equal-width histogram over [min, max]. A degenerate range (all values
    equal) widens to [v-0.5, v+0.5] so counts still land in a real bin.
    Returns (edges [bins+1], counts [bins]); counts always sum to len(values).
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise MetricError("histogram needs at least one value")
    if bins < 1:
        raise MetricError(f"bins must be positive, got {bins}")
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(v, bins=edges)
    return edges, counts


def population_moments(values):
    """(mean, std, skewness, excess kurtosis) with population normalization.

    Skewness and kurtosis of a zero-variance sample are reported as 0.0
    rather than NaN; the std already identifies the degenerate case.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise MetricError("moment summary needs at least one value")
    mean = float(v.mean())
    centered = v - mean
    m2 = float(np.mean(centered**2))
    if m2 == 0.0:
        return mean, 0.0, 0.0, 0.0
    m3 = float(np.mean(centered**3))
    m4 = float(np.mean(centered**4))
    return mean, float(np.sqrt(m2)), m3 / m2**1.5, m4 / m2**2 - 3.0


def pearson(x, y):
    """Pearson r, or None when undefined (fewer than 2 points or a
    zero-variance coordinate)."""
    a = np.asarray(x, dtype=np.float64).ravel()
    b = np.asarray(y, dtype=np.float64).ravel()
    if a.size != b.size:
        raise MetricError(f"pearson needs equal-length inputs, got {a.size} and {b.size}")
    if a.size < 2 or a.std() == 0.0 or b.std() == 0.0:
        return None
    r = float(np.corrcoef(a, b)[0, 1])
    return max(-1.0, min(1.0, r))


def ks_statistic(a, b):
    """Exact two-sample Kolmogorov-Smirnov statistic sup|F_a - F_b|."""
    x = np.sort(np.asarray(a, dtype=np.float64).ravel())
    y = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if x.size == 0 or y.size == 0:
        raise MetricError("ks_statistic needs non-empty samples")
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / x.size
    fy = np.searchsorted(y, grid, side="right") / y.size
    return float(np.abs(fx - fy).max())
