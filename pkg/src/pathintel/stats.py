"""Correlation and regression statistics used by the evaluation protocol."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .errors import ValidationError


@dataclass(frozen=True)
class CorrelationResult:
    pearson_r: float
    pearson_p: float
    spearman_r: float
    spearman_p: float
    n: int
    slope: float
    intercept: float

    def as_dict(self) -> dict:
        return {
            "pearson_r": self.pearson_r,
            "pearson_p": self.pearson_p,
            "spearman_r": self.spearman_r,
            "spearman_p": self.spearman_p,
            "n": self.n,
            "regression": {"slope": self.slope, "intercept": self.intercept},
        }


def student_t_two_sided_p(t: float, df: int) -> float:
    """P(|T| >= t) for Student t with df degrees of freedom, via the
    regularized incomplete beta function: I_{df/(df+t^2)}(df/2, 1/2).
    """
    if df < 1:
        raise ValidationError("degrees of freedom must be >= 1")
    t = float(t)
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    return float(betainc(df / 2.0, 0.5, x))


def _check_xy(x, y, min_n: int):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("x and y must be equal-length vectors")
    if x.size < min_n:
        raise ValidationError(f"need at least {min_n} points, got {x.size}")
    return x, y


def pearson(x, y) -> tuple[float, float]:
    """Sample Pearson correlation with a two-sided t-test p-value."""
    x, y = _check_xy(x, y, 3)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt(np.sum(dx * dx))
    sy = np.sqrt(np.sum(dy * dy))
    if sx == 0.0 or sy == 0.0:
        raise ValidationError("zero variance in correlation input")
    r = float(np.sum(dx * dy) / (sx * sy))
    r = max(-1.0, min(1.0, r))
    n = x.size
    if abs(r) == 1.0:
        # degenerate perfect correlation: p underflows; keep it in (0, 1]
        return r, float(np.nextafter(0.0, 1.0))
    t = r * np.sqrt((n - 2) / (1.0 - r * r))
    return r, student_t_two_sided_p(t, n - 2)


def midranks(x) -> np.ndarray:
    """Ranks starting at 1, ties replaced by their average rank."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i: j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> tuple[float, float]:
    """Spearman rank correlation (mid-ranks for ties) with t-approximation p."""
    x, y = _check_xy(x, y, 3)
    return pearson(midranks(x), midranks(y))


def linear_regression(x, y) -> tuple[float, float]:
    """Ordinary least squares fit y = slope * x + intercept."""
    x, y = _check_xy(x, y, 2)
    dx = x - x.mean()
    sxx = float(np.sum(dx * dx))
    if sxx == 0.0:
        raise ValidationError("x has zero variance")
    slope = float(np.sum(dx * (y - y.mean())) / sxx)
    return slope, float(y.mean() - slope * x.mean())


def correlate(x, y) -> CorrelationResult:
    """All evaluation statistics for one scatter: Pearson, Spearman, OLS."""
    r, p = pearson(x, y)
    rs, ps = spearman(x, y)
    slope, intercept = linear_regression(x, y)
    return CorrelationResult(r, p, rs, ps, len(np.asarray(x)), slope, intercept)
