"""Shared statistics: attribute binning for diagnostic curves, Pearson
correlation with permutation p-values, and bootstrap percentile intervals.

Randomized procedures draw from numpy Generators seeded per (seed, index)
so parallel and serial execution produce identical streams.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class BinnedCurve:
    x_center: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray
    n: np.ndarray
    mode: str

    def to_csv(self):
        lines = ["x_center,y_mean,y_std,n"]
        for xc, ym, ys, n in zip(self.x_center, self.y_mean, self.y_std, self.n):
            lines.append(f"{float(xc)!r},{float(ym)!r},{float(ys)!r},{int(n)}")
        return "\n".join(lines) + "\n"


@dataclass
class CorrelationResult:
    rho: float
    p_value: float
    n: int


def _kmeans_1d_partition(xs, k):
    """Optimal contiguous k-partition of sorted xs by within-cluster SSE
    (dynamic program). Returns boundary index list of length k+1."""
    n = len(xs)
    pref = np.concatenate([[0.0], np.cumsum(xs)])
    pref2 = np.concatenate([[0.0], np.cumsum(xs * xs)])

    def sse(i, j):  # xs[i:j]
        m = j - i
        s = pref[j] - pref[i]
        return (pref2[j] - pref2[i]) - s * s / m

    cost = np.full((k + 1, n + 1), np.inf)
    split = np.zeros((k + 1, n + 1), dtype=int)
    cost[0, 0] = 0.0
    for g in range(1, k + 1):
        for j in range(g, n + 1):
            best, arg = np.inf, g - 1
            for i in range(g - 1, j):
                c = cost[g - 1, i] + sse(i, j)
                if c < best:
                    best, arg = c, i
            cost[g, j] = best
            split[g, j] = arg
    bounds = [n]
    j = n
    for g in range(k, 0, -1):
        j = split[g, j]
        bounds.append(j)
    return bounds[::-1]


def bin_by_attribute(pairs, k=6, mode="quantile"):
    """Bin (x, y) pairs by x and summarize y per bin.

    quantile: equal-population bins by x-rank (ties broken by input order);
    kmeans1d: optimal 1-D k-means clustering of x by dynamic programming.
    """
    pairs = [(float(x), float(y)) for x, y in pairs]
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    n = len(x)
    if k < 1 or k > n:
        raise ValueError(f"bin count {k} out of range for {n} pairs")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite x attribute")
    order = np.lexsort((np.arange(n), x))   # stable in input order on ties
    if mode == "quantile":
        sizes = np.full(k, n // k)
        sizes[: n % k] += 1
        bounds = np.concatenate([[0], np.cumsum(sizes)])
    elif mode == "kmeans1d":
        bounds = _kmeans_1d_partition(x[order], k)
    else:
        raise ValueError(f"unknown binning mode {mode!r}")
    xc, ym, ys, counts = [], [], [], []
    for b in range(k):
        idx = order[bounds[b]:bounds[b + 1]]
        if len(idx) == 0:
            continue
        xc.append(x[idx].mean())
        ym.append(y[idx].mean())
        ys.append(y[idx].std())
        counts.append(len(idx))
    return BinnedCurve(np.array(xc), np.array(ym), np.array(ys),
                       np.array(counts), mode)


def pearson_rho(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt((xc * xc).sum())
    sy = np.sqrt((yc * yc).sum())
    if sx == 0 or sy == 0:
        raise ValueError("zero variance: correlation undefined")
    return float((xc * yc).sum() / (sx * sy))


def pearson(x, y, permutations=10000, seed=0):
    """Pearson's rho with a two-sided permutation p-value.

    p = (1 + #{|rho_perm| >= |rho|}) / (1 + permutations).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y) or len(x) < 3:
        raise ValueError("need equal-length vectors with n >= 3")
    rho = pearson_rho(x, y)
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    hits = 0
    for i in range(permutations):
        rng = np.random.default_rng((seed, i))
        perm = rng.permutation(len(y))
        r = float((xc * yc[perm]).sum() / denom)
        if abs(r) >= abs(rho) - 1e-12:
            hits += 1
    p = (1 + hits) / (1 + permutations)
    return CorrelationResult(rho, p, len(x))


def bootstrap_ci(units, statistic, b=1000, level=0.95, seed=0, max_retries=5):
    """Percentile bootstrap interval for a statistic over exchangeable units.

    units: sequence (indexed arbitrarily); statistic receives a resampled
    list of units. A resample on which the statistic raises is redrawn up
    to max_retries times. Returns (low, high, point).
    """
    units = list(units)
    n = len(units)
    if n < 2:
        raise ValueError("need >= 2 units to bootstrap")
    if b < 100:
        raise ValueError("need >= 100 resamples")
    point = statistic(units)
    stats = np.empty(b)
    for i in range(b):
        rng = np.random.default_rng((seed, i))
        for attempt in range(max_retries + 1):
            idx = rng.integers(0, n, n)
            try:
                stats[i] = statistic([units[j] for j in idx])
                break
            except Exception:
                if attempt == max_retries:
                    raise
    alpha = (1 - level) / 2
    low, high = np.quantile(stats, [alpha, 1 - alpha])
    return float(low), float(high), float(point)
