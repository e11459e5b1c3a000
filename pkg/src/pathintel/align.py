"""Multivariate dynamic time warping of code matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .codes import CodeMatrix
from .errors import ValidationError


@dataclass(frozen=True)
class WarpPath:
    """Monotone alignment path on the T_ref x T_other grid."""

    pairs: tuple  # of (i, j)
    total_cost: float

    def __post_init__(self):
        if not self.pairs:
            raise ValidationError("warp path is empty")
        if self.total_cost < 0:
            raise ValidationError("negative path cost")
        if self.pairs[0] != (0, 0):
            raise ValidationError("warp path must start at (0, 0)")
        for (i0, j0), (i1, j1) in zip(self.pairs, self.pairs[1:]):
            if (i1 - i0, j1 - j0) not in ((1, 0), (0, 1), (1, 1)):
                raise ValidationError(f"illegal step ({i0},{j0}) -> ({i1},{j1})")

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class AlignedPair:
    """The two code matrices materialized along a common warp path."""

    ref_warped: np.ndarray    # C x K
    other_warped: np.ndarray  # C x K

    def __post_init__(self):
        if self.ref_warped.shape != self.other_warped.shape:
            raise ValidationError("aligned matrices must share shape")

    @property
    def K(self) -> int:
        return self.ref_warped.shape[1]


def frame_distance(x: np.ndarray, y: np.ndarray) -> float:
    """Euclidean distance between two code frames."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValidationError(f"frame dimension mismatch: {x.shape} vs {y.shape}")
    return float(np.sqrt(np.sum((x - y) ** 2)))


def dtw(a: CodeMatrix, b: CodeMatrix, band: int | None = None) -> WarpPath:
    """Minimum-cost monotone alignment of a (reference) against b.

    Cost is the sum of Euclidean frame distances over the whole path,
    endpoints included.  Backtrace ties prefer the diagonal step, then the
    step advancing the reference index, making the path deterministic.
    ``band`` optionally enables a Sakoe-Chiba constraint of that half-width.
    """
    if a.C != b.C:
        raise ValidationError(f"code dimension mismatch: {a.C} vs {b.C}")
    ta, tb = a.T, b.T
    d = cdist(a.values.T.astype(np.float64), b.values.T.astype(np.float64))
    if band is not None:
        mask = np.abs(np.subtract.outer(np.arange(ta), np.arange(tb))) > band
        d = np.where(mask, np.inf, d)

    acc = np.full((ta, tb), np.inf)
    # 0 = diagonal, 1 = reference-advance (from i-1,j), 2 = from (i, j-1)
    step = np.zeros((ta, tb), dtype=np.uint8)
    acc[0, 0] = d[0, 0]
    for j in range(1, tb):
        acc[0, j] = acc[0, j - 1] + d[0, j]
        step[0, j] = 2
    for i in range(1, ta):
        acc[i, 0] = acc[i - 1, 0] + d[i, 0]
        step[i, 0] = 1
        row, up = acc[i], acc[i - 1]
        drow = d[i]
        for j in range(1, tb):
            diag, vert, horz = up[j - 1], up[j], row[j - 1]
            # tie order: diagonal, then reference-advance
            if diag <= vert and diag <= horz:
                row[j] = diag + drow[j]
                step[i, j] = 0
            elif vert <= horz:
                row[j] = vert + drow[j]
                step[i, j] = 1
            else:
                row[j] = horz + drow[j]
                step[i, j] = 2

    pairs = [(ta - 1, tb - 1)]
    i, j = ta - 1, tb - 1
    while (i, j) != (0, 0):
        s = step[i, j]
        if s == 0:
            i, j = i - 1, j - 1
        elif s == 1:
            i -= 1
        else:
            j -= 1
        pairs.append((i, j))
    pairs.reverse()
    return WarpPath(tuple(pairs), float(acc[ta - 1, tb - 1]))


def warp(a: CodeMatrix, b: CodeMatrix, path: WarpPath) -> AlignedPair:
    """Materialize both matrices along the path's coordinate projections."""
    idx_a = np.fromiter((p[0] for p in path.pairs), dtype=np.intp)
    idx_b = np.fromiter((p[1] for p in path.pairs), dtype=np.intp)
    if idx_a[-1] != a.T - 1 or idx_b[-1] != b.T - 1:
        raise ValidationError("warp path does not match matrix lengths")
    return AlignedPair(a.values[:, idx_a], b.values[:, idx_b])


def align(a: CodeMatrix, b: CodeMatrix, band: int | None = None) -> tuple[AlignedPair, WarpPath]:
    path = dtw(a, b, band=band)
    return warp(a, b, path), path
