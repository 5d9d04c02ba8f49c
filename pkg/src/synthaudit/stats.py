"""ROC curves, AUC, confusion, quantiles and the BCa bootstrap.

The ROC sweep follows the standard construction: thresholds descend over
the distinct scores, tied scores collapse to one operating point, and the
curve starts at (0, 0). AUC is the trapezoidal integral of that curve,
which for binary labels equals the Mann-Whitney rank statistic with half
credit for ties; ``auc_rank`` computes the rank form directly and exists
mainly so the two routes can be checked against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, OutOfDomain, SingleClass


@dataclass
class RocCurve:
    points: np.ndarray  # (P, 2), columns fpr, tpr
    auc: float

    @property
    def fpr(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def tpr(self) -> np.ndarray:
        return self.points[:, 1]

    def csv_rows(self):
        return [(float(x), float(y)) for x, y in self.points]


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (K, K) int64, rows = true class, cols = predicted

    def to_lists(self):
        return [[int(v) for v in row] for row in self.counts]


def _trapezoid(points: np.ndarray) -> float:
    x = points[:, 0]
    y = points[:, 1]
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1])) * 0.5)


def roc_curve(scores, labels) -> RocCurve:
    """Threshold sweep over distinct scores, descending; higher score = positive."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.ndim != 1 or y.shape != s.shape:
        raise ValueError("scores and labels must be equal-length vectors")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be binary")
    y = y.astype(np.int64)
    npos = int(y.sum())
    nneg = y.size - npos
    if npos == 0 or nneg == 0:
        raise SingleClass("need both positive and negative labels")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    tps = np.cumsum(y_sorted)
    fps = np.cumsum(1 - y_sorted)
    # one operating point per distinct score: the last index of each tie block
    last = np.r_[np.nonzero(np.diff(s_sorted))[0], s_sorted.size - 1]
    fpr = fps[last] / nneg
    tpr = tps[last] / npos
    points = np.vstack([[0.0, 0.0], np.column_stack([fpr, tpr])])
    return RocCurve(points=points, auc=_trapezoid(points))


def auc_rank(scores, labels) -> float:
    """Mann-Whitney form of the AUC: P(pos > neg) + 0.5 P(pos = neg)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64)
    pos = s[y == 1]
    neg = s[y == 0]
    if pos.size == 0 or neg.size == 0:
        raise SingleClass("need both positive and negative labels")
    wins = np.count_nonzero(pos[:, None] > neg[None, :])
    ties = np.count_nonzero(pos[:, None] == neg[None, :])
    return (wins + 0.5 * ties) / (pos.size * neg.size)


def one_vs_rest(labels, k: int) -> np.ndarray:
    """Binary indicator for class k; a class absent from labels gives all zeros."""
    y = np.asarray(labels)
    return (y == k).astype(np.int64)


def _curve_knots(curve: RocCurve):
    """Distinct fprs with the first and last tpr seen at each, in point order."""
    xs: list[float] = []
    first: list[float] = []
    last: list[float] = []
    for x, y in curve.points:
        if xs and x == xs[-1]:
            last[-1] = y
        else:
            xs.append(float(x))
            first.append(float(y))
            last.append(float(y))
    return np.asarray(xs), np.asarray(first), np.asarray(last)


def macro_average(curves) -> RocCurve:
    """Equal-weight average of ROC curves on the union of their fpr knots.

    Vertical segments are kept: a grid fpr contributes as many points as
    the largest per-curve point count there. Curves average their own tpr
    list at that fpr (padded with its last value), or the linear
    interpolation of the surrounding segment when the fpr is absent. With
    identical inputs the output reproduces the input point list.
    """
    curves = list(curves)
    if not curves:
        raise EmptyInput("no curves to average")
    maps = []
    knots = []
    for c in curves:
        m: dict[float, list[float]] = {}
        for x, y in c.points:
            m.setdefault(float(x), []).append(float(y))
        maps.append(m)
        knots.append(_curve_knots(c))
    grid = sorted(set().union(*maps) | {0.0, 1.0})
    out: list[tuple[float, float]] = []
    for x in grid:
        mult = max(len(m.get(x, ())) for m in maps)
        mult = max(mult, 1)
        acc = np.zeros(mult)
        for m, (xs, y_first, y_last) in zip(maps, knots):
            col = m.get(x)
            if col is None:
                j = int(np.searchsorted(xs, x))
                x0, x1 = xs[j - 1], xs[j]
                y0, y1 = y_last[j - 1], y_first[j]
                v = y0 + (y1 - y0) * (x - x0) / (x1 - x0)
                acc += v
            else:
                padded = col + [col[-1]] * (mult - len(col))
                acc += padded
        acc /= len(curves)
        out.extend((x, float(v)) for v in acc)
    points = np.asarray(out)
    return RocCurve(points=points, auc=_trapezoid(points))


def confusion(pred_probs, labels) -> ConfusionMatrix:
    """Counts of (true, argmax-predicted) pairs; argmax ties go to the lowest index."""
    p = np.asarray(pred_probs, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64)
    if p.ndim != 2 or p.shape[0] != y.shape[0]:
        raise ValueError("pred_probs must be (N, K) aligned with labels")
    if not np.all(np.isfinite(p)):
        raise ValueError("probabilities must be finite")
    k = p.shape[1]
    if np.any(y < 0) or np.any(y >= k):
        raise ValueError("label outside [0, K)")
    pred = np.argmax(p, axis=1)
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (y, pred), 1)
    return ConfusionMatrix(counts=counts)


def empirical_quantile(values, p: float) -> float:
    """Linear-interpolation quantile on the sorted values, p in [0, 100]."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptyInput("no values")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    if not 0.0 <= p <= 100.0:
        raise ValueError(f"percentile {p} outside [0, 100]")
    v = np.sort(v)
    h = (v.size - 1) * (p / 100.0)
    lo = int(math.floor(h))
    hi = min(lo + 1, v.size - 1)
    frac = h - lo
    return float(v[lo] + frac * (v[hi] - v[lo]))


# ---------------------------------------------------------------------------
# normal quantile (Acklam's rational approximation + one Newton step)

_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def _normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF, absolute error below 1e-9 on (0, 1)."""
    if not 0.0 < p < 1.0:
        raise OutOfDomain(f"p={p} outside (0, 1)")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
              / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    # one Newton refinement against the erfc-based CDF
    err = _normal_cdf(x) - p
    x -= err / _normal_pdf(x)
    return x


# ---------------------------------------------------------------------------
# BCa bootstrap


@dataclass
class BootstrapCI:
    point_estimate: float
    lower: float
    upper: float
    alpha: float
    n_resamples: int
    seed: int
    method: str = "bca"  # "bca" | "percentile" | "degenerate"

    def to_dict(self) -> dict:
        return {
            "estimate": self.point_estimate,
            "lower": self.lower,
            "upper": self.upper,
            "alpha": self.alpha,
            "n_resamples": self.n_resamples,
            "seed": self.seed,
            "method": self.method,
        }


def _resample_rng(seed: int, r: int) -> np.random.Generator:
    # one child stream per resample index, so the draw for resample r does
    # not depend on how many resamples ran before it
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(r,)))


def bca_interval(data, statistic, n_resamples: int, alpha: float, seed: int) -> BootstrapCI:
    """Bias-corrected accelerated bootstrap interval for ``statistic(data)``.

    ``data`` is resampled along its first axis. The bias correction uses
    the fraction of resamples strictly below the point estimate plus half
    of the exact ties; the acceleration comes from the jackknife skewness.
    A jackknife with zero spread cannot support the acceleration term, so
    the interval falls back to the plain percentile method and says so in
    ``method``. If every resample produces the same value the interval
    collapses to the point estimate.
    """
    arr = np.asarray(data)
    n = arr.shape[0]
    if n < 2:
        raise ValueError("need at least 2 observations")
    if n_resamples < 1:
        raise ValueError("need at least 1 resample")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha {alpha} outside (0, 1)")
    theta = float(statistic(arr))
    boot = np.empty(n_resamples, dtype=np.float64)
    for r in range(n_resamples):
        idx = _resample_rng(seed, r).integers(0, n, size=n)
        boot[r] = statistic(arr[idx])
    if not np.all(np.isfinite(boot)):
        raise ValueError("statistic produced non-finite resample values")
    if boot.max() == boot.min():
        return BootstrapCI(theta, theta, theta, alpha, n_resamples, seed, method="degenerate")

    below = np.count_nonzero(boot < theta)
    ties = np.count_nonzero(boot == theta)
    frac = (below + 0.5 * ties) / n_resamples
    frac = min(max(frac, 0.5 / n_resamples), 1.0 - 0.5 / n_resamples)
    z0 = normal_quantile(frac)

    jack = np.empty(n, dtype=np.float64)
    for i in range(n):
        jack[i] = statistic(np.delete(arr, i, axis=0))
    d = jack.mean() - jack
    denom = float(np.sum(d * d)) ** 1.5
    if denom == 0.0:
        method = "percentile"
        lo_level, hi_level = alpha / 2.0, 1.0 - alpha / 2.0
    else:
        method = "bca"
        accel = float(np.sum(d ** 3)) / (6.0 * denom)

        def adjusted(z: float) -> float:
            t = z0 + z
            scale = 1.0 - accel * t
            if scale <= 0.0:
                return 1.0 if t > 0.0 else 0.0
            return _normal_cdf(z0 + t / scale)

        lo_level = adjusted(normal_quantile(alpha / 2.0))
        hi_level = adjusted(normal_quantile(1.0 - alpha / 2.0))

    lower = empirical_quantile(boot, 100.0 * lo_level)
    upper = empirical_quantile(boot, 100.0 * hi_level)
    return BootstrapCI(theta, lower, upper, alpha, n_resamples, seed, method=method)
