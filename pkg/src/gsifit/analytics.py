"""Descriptive statistics, correlation and rank tests, KDE and mean-shift clustering."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .safety import ValidationError


class DegenerateInput(ValueError):
    """The statistic is undefined for this input (constant data, one cluster, ...)."""


class TestMethod(str, enum.Enum):
    __test__ = False  # not a pytest class

    PEARSON = "Pearson"
    MANN_WHITNEY_U = "MannWhitneyU"
    WILCOXON_SIGNED_RANK = "WilcoxonSignedRank"


@dataclass(frozen=True)
class DescriptiveSummary:
    n: int
    mean: float
    sd: float
    se: float
    min: float
    max: float

    @property
    def sd_defined(self) -> bool:
        return self.n >= 2


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    statistic: float
    p_value: float
    effect_r: float
    n: tuple[int, ...]
    method: TestMethod
    exact: bool = False
    z: float = float("nan")


@dataclass
class ClusterResult:
    labels: np.ndarray
    modes: np.ndarray
    counts: list[int]
    outliers: list[int]
    silhouette: float
    bandwidth: float
    iterations: list[int] = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return len(self.counts)


def describe(values: Sequence[float]) -> DescriptiveSummary:
    """Mean, unbiased SD, SE = SD / sqrt(n), and range; SD/SE are NaN when n == 1."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValidationError("describe() needs at least one value")
    n = int(x.size)
    mean = float(x.mean())
    if n >= 2:
        sd = float(x.std(ddof=1))
        se = sd / math.sqrt(n)
    else:
        sd = se = float("nan")
    # keep min <= mean <= max under rounding
    return DescriptiveSummary(n, min(max(mean, float(x.min())), float(x.max())), sd, se,
                              float(x.min()), float(x.max()))


def pearson(x: Sequence[float], y: Sequence[float]) -> TestResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("pearson() needs two 1-D sequences of equal length")
    n = x.size
    if n < 3:
        raise ValidationError(f"pearson() needs n >= 3, got {n}")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx, syy = float(xc @ xc), float(yc @ yc)
    if sxx == 0 or syy == 0:
        raise DegenerateInput("pearson() is undefined for a constant input")
    r = float(xc @ yc) / math.sqrt(sxx * syy)
    r = min(max(r, -1.0), 1.0)
    if abs(r) == 1.0:
        p = 0.0
    else:
        t = r * math.sqrt((n - 2) / (1.0 - r * r))
        p = float(min(1.0, 2.0 * stats.t.sf(abs(t), n - 2)))
    return TestResult(r, p, r, (n,), TestMethod.PEARSON)


def midranks(values: np.ndarray) -> np.ndarray:
    return stats.rankdata(values, method="average")


def _tie_term(ranks: np.ndarray) -> float:
    _, counts = np.unique(ranks, return_counts=True)
    counts = counts.astype(float)
    return float(np.sum(counts**3 - counts))


def _two_sided_exact(dist: np.ndarray, observed: int) -> float:
    """p = 2 * min(P(S <= s), P(S >= s)) for a count vector indexed by integer S."""
    total = dist.sum()
    lower = dist[: observed + 1].sum() / total
    upper = dist[observed:].sum() / total
    return float(min(1.0, 2.0 * min(lower, upper)))


def _subset_sum_counts(weights: np.ndarray, k: int) -> np.ndarray:
    """Number of size-k subsets of `weights` (non-negative ints) with each total."""
    top = int(weights.sum())
    dp = np.zeros((k + 1, top + 1))
    dp[0, 0] = 1.0
    for i, w in enumerate(weights, start=1):
        w = int(w)
        for j in range(min(i, k), 0, -1):
            if w == 0:
                dp[j] += dp[j - 1]
            else:
                dp[j, w:] += dp[j - 1, :-w]
    return dp[k]


def mann_whitney_u(a: Sequence[float], b: Sequence[float],
                   exact_max_n: int = 8) -> TestResult:
    """Two-sided Mann-Whitney U test; statistic is U for `a`.

    The exact permutation distribution (midranks included) is used when the
    smaller group has at most exact_max_n members; otherwise the normal
    approximation with tie and continuity corrections.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = a.size, b.size
    if na == 0 or nb == 0:
        raise ValidationError("mann_whitney_u() needs two non-empty samples")
    n = na + nb
    ranks = midranks(np.concatenate([a, b]))
    ra = float(ranks[:na].sum())
    u_a = ra - na * (na + 1) / 2.0
    mu = na * nb / 2.0
    var = na * nb / 12.0 * ((n + 1) - _tie_term(ranks) / (n * (n - 1))) if n > 1 else 0.0
    sd = math.sqrt(max(var, 0.0))
    z = (u_a - mu) / sd if sd > 0 else 0.0
    effect = abs(z) / math.sqrt(n)
    if min(na, nb) <= exact_max_n:
        doubled = np.rint(2 * ranks).astype(np.int64)
        dist = _subset_sum_counts(doubled, na)
        p = _two_sided_exact(dist, int(round(2 * ra)))
        return TestResult(u_a, p, effect, (na, nb), TestMethod.MANN_WHITNEY_U, True, z)
    if sd == 0:
        p = 1.0
    else:
        zc = max(abs(u_a - mu) - 0.5, 0.0) / sd
        p = float(min(1.0, 2.0 * stats.norm.sf(zc)))
    return TestResult(u_a, p, effect, (na, nb), TestMethod.MANN_WHITNEY_U, False, z)


def wilcoxon_signed_rank(pre: Sequence[float], post: Sequence[float],
                         zero_method: str = "wilcox", exact_max_n: int = 25) -> TestResult:
    """Two-sided Wilcoxon signed-rank test on post - pre.

    statistic is W = min(W+, W-). zero_method "wilcox" drops zero differences
    before ranking; "pratt" ranks them and then drops them.
    """
    pre = np.asarray(pre, dtype=float)
    post = np.asarray(post, dtype=float)
    if pre.shape != post.shape or pre.ndim != 1:
        raise ValidationError("wilcoxon_signed_rank() needs paired sequences of equal length")
    diff = post - pre
    if zero_method == "wilcox":
        diff = diff[diff != 0]
        ranks = midranks(np.abs(diff))
    elif zero_method == "pratt":
        all_ranks = midranks(np.abs(diff))
        keep = diff != 0
        diff, ranks = diff[keep], all_ranks[keep]
    else:
        raise ValidationError(f"unknown zero_method {zero_method!r}")
    n = diff.size
    if n == 0:
        raise DegenerateInput("all paired differences are zero")
    w_plus = float(ranks[diff > 0].sum())
    total = float(ranks.sum())
    w = min(w_plus, total - w_plus)
    mu = total / 2.0
    var = float(np.sum(ranks**2)) / 4.0
    sd = math.sqrt(var)
    z = (w_plus - mu) / sd if sd > 0 else 0.0
    effect = abs(z) / math.sqrt(n)
    if n <= exact_max_n:
        doubled = np.rint(2 * ranks).astype(np.int64)
        top = int(doubled.sum())
        dist = np.zeros(top + 1)
        dist[0] = 1.0
        for r2 in doubled:
            r2 = int(r2)
            shifted = np.zeros_like(dist)
            shifted[r2:] = dist[: top + 1 - r2]
            dist = dist + shifted
        p = _two_sided_exact(dist, int(round(2 * w_plus)))
        return TestResult(w, p, effect, (n,), TestMethod.WILCOXON_SIGNED_RANK, True, z)
    zc = max(abs(w_plus - mu) - 0.5, 0.0) / sd
    p = float(min(1.0, 2.0 * stats.norm.sf(zc)))
    return TestResult(w, p, effect, (n,), TestMethod.WILCOXON_SIGNED_RANK, False, z)


def silverman_bandwidth(values: np.ndarray) -> float:
    """Rule-of-thumb Gaussian bandwidth; 1.0 when the data have no spread."""
    x = np.asarray(values, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, dim = x.shape
    sd = float(np.mean(x.std(axis=0, ddof=1))) if n > 1 else 0.0
    if not sd > 0:
        return 1.0
    return (4.0 / (dim + 2)) ** (1.0 / (dim + 4)) * n ** (-1.0 / (dim + 4)) * sd


def _as_points(points) -> np.ndarray:
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValidationError("points must be a sequence of scalars or of equal-length vectors")
    return x


def silhouette(points, labels) -> float:
    """Mean silhouette width; members of singleton clusters score 0."""
    x = _as_points(points)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise DegenerateInput("silhouette needs at least two clusters")
    dist = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
    masks = [labels == u for u in uniq]
    sizes = np.array([m.sum() for m in masks])
    # mean distance from every point to every cluster
    sums = np.stack([dist[:, m].sum(axis=1) for m in masks], axis=1)
    own = np.searchsorted(uniq, labels)
    scores = np.zeros(len(x))
    for i in range(len(x)):
        k = own[i]
        if sizes[k] == 1:
            continue
        a = sums[i, k] / (sizes[k] - 1)
        others = [sums[i, j] / sizes[j] for j in range(len(uniq)) if j != k]
        b = min(others)
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


def mean_shift(points, bandwidth: Optional[float] = None, tol: float = 1e-4,
               max_iter: int = 300) -> ClusterResult:
    """Gaussian-kernel mean shift.

    Every point climbs to a density mode; modes closer than bandwidth / 2 are
    merged in coordinate order, then points are labelled by nearest mode.
    Cluster ids follow ascending mode coordinates. Single-member clusters are
    listed in `outliers` but keep their label.
    """
    x = _as_points(points)
    n = len(x)
    if n < 2:
        raise ValidationError("mean_shift() needs at least two points")
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValidationError(f"bandwidth must be > 0, got {bandwidth}")
    modes = x.copy()
    active = np.ones(n, dtype=bool)
    iters = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        if not active.any():
            break
        cur = modes[active]
        d2 = ((cur[:, None, :] - x[None, :, :]) ** 2).sum(-1)
        w = np.exp(-0.5 * d2 / h**2)
        new = (w @ x) / w.sum(axis=1, keepdims=True)
        shift = np.sqrt(((new - cur) ** 2).sum(-1))
        idx = np.flatnonzero(active)
        modes[idx] = new
        iters[idx] += 1
        active[idx[shift < tol]] = False

    order = np.lexsort(modes.T[::-1])
    centers: list[list[np.ndarray]] = []
    for i in order:
        for members in centers:
            if np.linalg.norm(modes[i] - members[0]) < h / 2:
                members.append(modes[i])
                break
        else:
            centers.append([modes[i]])
    merged = np.array([np.mean(m, axis=0) for m in centers])
    d2 = ((x[:, None, :] - merged[None, :, :]) ** 2).sum(-1)
    raw = np.argmin(d2, axis=1)
    used = np.unique(raw)
    merged = merged[used]
    labels = np.searchsorted(used, raw)
    counts = [int(np.sum(labels == k)) for k in range(len(used))]
    outliers = [int(i) for i in range(n) if counts[labels[i]] == 1]
    sil = silhouette(x, labels) if len(used) >= 2 else float("nan")
    return ClusterResult(labels, merged, counts, outliers, sil, h, iters.tolist())


def kde_1d(values: Sequence[float], bandwidth: Optional[float] = None,
           grid: int = 512, span: float = 4.0) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian KDE evaluated on `grid` points over [min - span*h, max + span*h]."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ValidationError("kde_1d() needs at least two values")
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValidationError(f"bandwidth must be > 0, got {bandwidth}")
    xs = np.linspace(x.min() - span * h, x.max() + span * h, grid)
    z = (xs[:, None] - x[None, :]) / h
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (x.size * h * math.sqrt(2 * math.pi))
    return xs, dens
