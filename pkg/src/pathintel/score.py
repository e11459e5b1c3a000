"""Squared-difference matrices and the speaker-level intelligibility index."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .align import AlignedPair
from .errors import ValidationError

INDEX_MODES = ("grand-mean", "per-utterance-mean")


@dataclass(frozen=True)
class DiffMatrix:
    """Elementwise squared difference of a time-aligned code pair."""

    values: np.ndarray  # C x K, nonnegative
    utterance_id: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim != 2:
            raise ValidationError("diff matrix must be 2-D")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValidationError("diff matrix entries must be finite and >= 0")

    @property
    def C(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class IntelligibilityIndex:
    """Grand mean of squared code differences over a speaker's utterances.

    Higher values mean larger divergence from the healthy reference,
    i.e. lower expected intelligibility.
    """

    value: float
    n_utterances: int
    speaker_id: str = ""

    def __post_init__(self):
        if self.value < 0 or self.n_utterances < 1:
            raise ValidationError("invalid intelligibility index")


def diff_matrix(pair: AlignedPair, utterance_id: str = "") -> DiffMatrix:
    delta = pair.ref_warped.astype(np.float64) - pair.other_warped.astype(np.float64)
    return DiffMatrix(delta**2, utterance_id=utterance_id)


def intelligibility_index(
    diffs: list[DiffMatrix], speaker_id: str = "", mode: str = "grand-mean"
) -> IntelligibilityIndex:
    """Aggregate N difference matrices into one index.

    grand-mean: mean over every element of all stacked matrices; with
    equal aligned lengths this is exactly the CTN-normalized triple sum.
    per-utterance-mean: mean of per-utterance means (weights utterances
    equally when aligned lengths differ).
    """
    if not diffs:
        raise ValidationError("no difference matrices to aggregate")
    if mode not in INDEX_MODES:
        raise ValidationError(f"unknown index mode {mode!r}")
    c = diffs[0].C
    for d in diffs:
        if d.C != c:
            raise ValidationError("code dimension differs across utterances")
    if mode == "grand-mean":
        total = float(np.sum([np.sum(d.values) for d in diffs]))
        count = sum(d.values.size for d in diffs)
        value = total / count
    else:
        value = float(np.mean([np.mean(d.values) for d in diffs]))
    return IntelligibilityIndex(value, len(diffs), speaker_id)
