"""Small statistical helpers used by the experiments."""

import math

import numpy as np
from scipy import special

from .errors import InvalidParameter


def normal_cdf(x, sigma=1.0):
    return 0.5 * (1.0 + math.erf(x / (sigma * math.sqrt(2.0))))


def ks_statistic(samples, cdf):
    """One-sample Kolmogorov-Smirnov distance sup |F_n - F|."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n == 0:
        raise InvalidParameter("KS statistic needs at least one sample")
    F = np.array([cdf(v) for v in x])
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def chi_square_p(stat, dof):
    """Upper tail P(chi2_dof >= stat) via the regularized incomplete gamma."""
    if dof <= 0:
        raise InvalidParameter("degrees of freedom must be positive")
    if stat < 0:
        raise InvalidParameter("chi-square statistic must be non-negative")
    return float(special.gammaincc(dof / 2.0, stat / 2.0))


def chi_square_gof(counts, probs):
    """Goodness of fit of observed counts to cell probabilities; returns (stat, dof, p)."""
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    n = counts.sum()
    expected = n * probs / probs.sum()
    keep = expected > 0
    if np.any(counts[~keep] > 0):
        return math.inf, int(keep.sum() - 1), 0.0
    stat = float(np.sum((counts[keep] - expected[keep]) ** 2 / expected[keep]))
    dof = int(keep.sum() - 1)
    if dof <= 0:
        return stat, 0, 1.0
    return stat, dof, chi_square_p(stat, dof)


def chi_square_two_sample(a, b, min_expected=5.0):
    """Homogeneity test of two histograms over the same cells.

    Cells with small pooled expectation are merged into one tail cell.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = a.sum(), b.sum()
    pooled = a + b
    small = pooled * min(na, nb) / (na + nb) < min_expected
    if small.any():
        a = np.append(a[~small], a[small].sum())
        b = np.append(b[~small], b[small].sum())
    pooled = a + b
    keep = pooled > 0
    a, b, pooled = a[keep], b[keep], pooled[keep]
    ea = pooled * na / (na + nb)
    eb = pooled * nb / (na + nb)
    stat = float(np.sum((a - ea) ** 2 / ea) + np.sum((b - eb) ** 2 / eb))
    dof = len(pooled) - 1
    if dof <= 0:
        return stat, 0, 1.0
    return stat, dof, chi_square_p(stat, dof)


def variance_se(var, M):
    """Standard error of a sample variance under approximate normality."""
    return var * math.sqrt(2.0 / (M - 1))


def compensated_sum(values):
    """Order-independent exactly rounded sum."""
    return math.fsum(values)
