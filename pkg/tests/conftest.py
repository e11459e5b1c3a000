import csv
from pathlib import Path

import numpy as np
import pytest

from pathintel.codes import CodeKind, CodeMatrix, write_code_matrix
from pathintel.preprocess import Utterance

SR = 16000


def tone(freq: float, seconds: float = 1.0, amp: float = 0.8,
         sr: int = SR) -> np.ndarray:
    t = np.arange(int(seconds * sr)) / sr
    return amp * np.sin(2 * np.pi * freq * t)


def make_utterance(samples, speaker="spk", utt="utt") -> Utterance:
    return Utterance(speaker, utt, np.asarray(samples, dtype=np.float64))


def brute_force_dtw_cost(a: np.ndarray, b: np.ndarray) -> float:
    """Exhaustive minimum over all monotone boundary-to-boundary paths.

    Independent of the DP implementation: enumerates paths explicitly.
    Inputs are consumed exactly as stored (float32), accumulated in
    float64 like the implementation.
    """
    av = a.astype(np.float64)
    bv = b.astype(np.float64)
    ta, tb = av.shape[1], bv.shape[1]
    d = np.sqrt(((av.T[:, None, :] - bv.T[None, :, :]) ** 2).sum(-1))
    best = np.inf
    stack = [((0, 0), d[0, 0])]
    while stack:
        (i, j), c = stack.pop()
        if (i, j) == (ta - 1, tb - 1):
            best = min(best, c)
            continue
        for di, dj in ((1, 1), (1, 0), (0, 1)):
            ni, nj = i + di, j + dj
            if ni < ta and nj < tb:
                stack.append(((ni, nj), c + d[ni, nj]))
    return best


def random_codes(rng, kind=CodeKind.CONTENT, c=16, t=10, scale=1.0,
                 speaker="spk", utt="utt") -> CodeMatrix:
    return CodeMatrix(kind, scale * rng.normal(size=(c, t)),
                      speaker_id=speaker, utterance_id=utt)


def build_synthetic_corpus(
    root: Path,
    n_subjects_per_gender: int = 5,
    n_utterances: int = 20,
    c: int = 16,
    t: int = 12,
    eps_step: float = 0.05,
    seed: int = 1234,
) -> tuple[Path, tuple[str, str]]:
    """Synthetic CDM1 corpus with a monotone degradation structure.

    Two control reference speakers (REF_F, REF_M) carry random content
    codes.  Subject k gets codes ref + eps_k * G with eps_k increasing
    and assigned intelligibility 100 - 10k, so the intelligibility index
    correlates negatively with the subjective score by construction.
    Returns (manifest_path, (female_ref_id, male_ref_id)).
    """
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    utt_ids = [f"u{i:03d}" for i in range(n_utterances)]
    refs = {"F": ("REF_F", {}), "M": ("REF_M", {})}
    rows = []
    for gender, (ref_id, ref_codes) in refs.items():
        for utt in utt_ids:
            m = random_codes(rng, c=c, t=t, speaker=ref_id, utt=utt)
            ref_codes[utt] = m
            path = root / f"{ref_id}__{utt}.cdm"
            write_code_matrix(m, path)
            rows.append([ref_id, gender, "control", "", utt, str(path)])

    k = 0
    for gender in ("F", "M"):
        ref_codes = refs[gender][1]
        for _ in range(n_subjects_per_gender):
            k += 1
            sid = f"PAT{k:02d}"
            eps = eps_step * k
            intel = 100.0 - 10.0 * k
            for utt in utt_ids:
                g = rng.normal(size=(c, t))
                vals = ref_codes[utt].values + eps * g
                m = CodeMatrix(CodeKind.CONTENT, vals, speaker_id=sid,
                               utterance_id=utt)
                path = root / f"{sid}__{utt}.cdm"
                write_code_matrix(m, path)
                rows.append([sid, gender, "pathological", f"{intel}", utt,
                             str(path)])

    manifest = root / "manifest.csv"
    with manifest.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["speaker_id", "gender", "group", "intelligibility",
                    "utterance_id", "path"])
        w.writerows(rows)
    return manifest, ("REF_F", "REF_M")


@pytest.fixture(scope="session")
def synthetic_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    manifest, refpair = build_synthetic_corpus(root)
    return manifest, refpair
