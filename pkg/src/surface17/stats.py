"""Statistical helpers: binomial intervals, bootstrap, two-sample tests."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import chi2, norm


def wilson_interval(successes: int, total: int, confidence: float = 0.99
                    ) -> tuple[float, float]:
    """Two-sided Wilson score interval for a binomial proportion."""
    if total < 1:
        raise ValueError("total must be >= 1")
    if not 0 <= successes <= total:
        raise ValueError("successes outside [0, total]")
    z = norm.ppf(0.5 + confidence / 2.0)
    phat = successes / total
    denom = 1.0 + z * z / total
    center = (phat + z * z / (2 * total)) / denom
    half = z * math.sqrt(phat * (1 - phat) / total + z * z / (4 * total * total)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def chi_square_two_sample(counts_a: np.ndarray, counts_b: np.ndarray,
                          min_pooled: int = 10) -> tuple[float, int, float]:
    """Two-sample chi-square homogeneity test over matched count cells.

    Cells whose pooled count falls below min_pooled are merged into one
    overflow bucket.  Returns (statistic, dof, p_value).
    """
    a = np.asarray(counts_a, dtype=float).reshape(-1)
    b = np.asarray(counts_b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ValueError("count arrays must have matching shapes")
    pooled = a + b
    big = pooled >= min_pooled
    cells_a = list(a[big])
    cells_b = list(b[big])
    rest_a = float(a[~big].sum())
    rest_b = float(b[~big].sum())
    if rest_a + rest_b > 0:
        cells_a.append(rest_a)
        cells_b.append(rest_b)
    ca = np.array(cells_a)
    cb = np.array(cells_b)
    na, nb = ca.sum(), cb.sum()
    if na == 0 or nb == 0:
        raise ValueError("both samples must be nonempty")
    k1 = math.sqrt(nb / na)
    k2 = math.sqrt(na / nb)
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = (k1 * ca - k2 * cb) ** 2 / (ca + cb)
    stat = float(np.nansum(terms))
    dof = max(1, len(ca) - 1)
    return stat, dof, float(chi2.sf(stat, dof))


def two_proportion_pvalue(k1: int, n1: int, k2: int, n2: int) -> float:
    """One-sided p-value for proportion 1 exceeding proportion 2
    (normal approximation with pooled variance)."""
    p1, p2 = k1 / n1, k2 / n2
    pooled = (k1 + k2) / (n1 + n2)
    se = math.sqrt(max(pooled * (1 - pooled) * (1 / n1 + 1 / n2), 1e-300))
    z = (p1 - p2) / se
    return float(norm.sf(z))
