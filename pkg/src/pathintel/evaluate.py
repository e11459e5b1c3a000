"""Corpus manifest handling, per-speaker scoring and the full evaluation
protocol: gender-matched reference pairs, correlations against subjective
intelligibility, reference-pair sweeps and the subsampling experiment.
"""
from __future__ import annotations

import csv
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .align import align
from .codes import CodeMatrix, load_code_matrix, mel_passthrough_codes
from .errors import NoSpeechError, ValidationError
from .features import mel_spectrogram
from .preprocess import load_audio, preprocess
from .score import IntelligibilityIndex, diff_matrix, intelligibility_index
from .stats import CorrelationResult, correlate

log = logging.getLogger(__name__)

GENDERS = ("F", "M")
GROUPS = ("control", "pathological")
MANIFEST_COLUMNS = ["speaker_id", "gender", "group", "intelligibility",
                    "utterance_id", "path"]
CONTROL_DEFAULT_INTELLIGIBILITY = 100.0


@dataclass
class SpeakerRecord:
    speaker_id: str
    gender: str  # "F" or "M"
    group: str   # "control" or "pathological"
    intelligibility: float | None
    utterances: dict[str, str] = field(default_factory=dict)  # utt_id -> path

    @property
    def subjective(self) -> float | None:
        if self.intelligibility is None and self.group == "control":
            return CONTROL_DEFAULT_INTELLIGIBILITY
        return self.intelligibility


@dataclass(frozen=True)
class ReferencePair:
    female_ref: str
    male_ref: str

    def member_for(self, gender: str) -> str:
        return self.female_ref if gender == "F" else self.male_ref

    @property
    def members(self) -> tuple[str, str]:
        return (self.female_ref, self.male_ref)


@dataclass
class UtteranceStat:
    """Per-utterance squared-difference totals, reusable for subsampling."""

    utterance_id: str
    phi_sum: float
    n_elements: int


@dataclass
class SpeakerResult:
    index: IntelligibilityIndex
    stats: list[UtteranceStat]
    skipped: list[str]  # utterance ids missing a parallel reference


@dataclass
class EvaluationReport:
    per_speaker: dict  # speaker_id -> {"index", "n_utterances", ...}
    correlation_all: CorrelationResult | None
    correlation_pat: CorrelationResult | None
    scatter: list  # rows of {"speaker_id", "group", "subjective", "index"}
    skipped: list  # {"speaker_id", "utterance_id", "reason"}
    failures: list  # {"speaker_id", "error"}
    config: dict
    notes: list

    def as_dict(self) -> dict:
        return {
            "per_speaker": self.per_speaker,
            "correlation_all": (
                self.correlation_all.as_dict() if self.correlation_all else None
            ),
            "correlation_pat": (
                self.correlation_pat.as_dict() if self.correlation_pat else None
            ),
            "scatter": self.scatter,
            "skipped": self.skipped,
            "failures": self.failures,
            "config": self.config,
            "notes": self.notes,
        }


def load_manifest(path) -> list[SpeakerRecord]:
    """Parse and validate the corpus manifest CSV."""
    path = Path(path)
    records: dict[str, SpeakerRecord] = {}
    seen: set[tuple[str, str]] = set()
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty manifest") from None
        if [h.strip() for h in header] != MANIFEST_COLUMNS:
            missing = set(MANIFEST_COLUMNS) - {h.strip() for h in header}
            raise ValidationError(
                f"{path}: bad manifest header, missing column(s) "
                f"{sorted(missing) or header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(MANIFEST_COLUMNS):
                raise ValidationError(f"{path}:{lineno}: expected 6 fields")
            spk, gender, group, intel, utt, wavpath = (c.strip() for c in row)
            if gender not in GENDERS:
                raise ValidationError(f"{path}:{lineno}: unknown gender {gender!r}")
            if group not in GROUPS:
                raise ValidationError(f"{path}:{lineno}: unknown group {group!r}")
            if intel == "":
                score = None
                if group == "pathological":
                    raise ValidationError(
                        f"{path}:{lineno}: pathological speaker {spk} lacks "
                        "a subjective intelligibility score"
                    )
            else:
                score = float(intel)
                if not (0.0 <= score <= 100.0):
                    raise ValidationError(
                        f"{path}:{lineno}: intelligibility {score} outside [0, 100]"
                    )
            if (spk, utt) in seen:
                raise ValidationError(
                    f"{path}:{lineno}: duplicate utterance {utt!r} for "
                    f"speaker {spk!r}"
                )
            seen.add((spk, utt))
            rec = records.get(spk)
            if rec is None:
                rec = records[spk] = SpeakerRecord(spk, gender, group, score)
            else:
                if rec.gender != gender or rec.group != group:
                    raise ValidationError(
                        f"{path}:{lineno}: inconsistent metadata for {spk!r}"
                    )
            rec.utterances[utt] = wavpath
    return [records[k] for k in sorted(records)]


class CdmFileProvider:
    """Code provider reading CDM1 files referenced by the manifest."""

    def __init__(self):
        self._cache: dict[str, CodeMatrix] = {}
        self._lock = threading.Lock()

    def __call__(self, speaker_id: str, utterance_id: str, path: str) -> CodeMatrix:
        with self._lock:
            hit = self._cache.get(path)
        if hit is not None:
            return hit
        m = load_code_matrix(path, speaker_id=speaker_id, utterance_id=utterance_id)
        with self._lock:
            self._cache[path] = m
        return m


class MelPassthroughProvider:
    """Model-free provider: preprocessed audio -> mel-spectrogram codes."""

    def __init__(self, trim_fraction: float = 0.15, vad_threshold_db: float = -35.0):
        self.trim_fraction = trim_fraction
        self.vad_threshold_db = vad_threshold_db
        self._cache: dict[str, CodeMatrix] = {}
        self._lock = threading.Lock()

    def __call__(self, speaker_id: str, utterance_id: str, path: str) -> CodeMatrix:
        with self._lock:
            hit = self._cache.get(path)
        if hit is not None:
            return hit
        u = load_audio(path, speaker_id=speaker_id, utterance_id=utterance_id)
        u = preprocess(u, trim_fraction=self.trim_fraction,
                       threshold_db=self.vad_threshold_db)
        m = mel_passthrough_codes(mel_spectrogram(u), speaker_id=speaker_id)
        with self._lock:
            self._cache[path] = m
        return m


def utterance_diff_stats(
    subject: SpeakerRecord,
    reference: SpeakerRecord,
    provider,
    band: int | None = None,
) -> tuple[list[UtteranceStat], list[str]]:
    """DTW-align each shared utterance pair and record squared-difference
    totals.  Utterances missing on either side, or rejected by VAD, are
    skipped and listed.
    """
    stats: list[UtteranceStat] = []
    skipped: list[str] = []
    # canonical utterance order keeps aggregation bit-stable regardless of
    # manifest row order
    for utt_id in sorted(subject.utterances):
        ref_path = reference.utterances.get(utt_id)
        if ref_path is None:
            skipped.append(utt_id)
            continue
        try:
            z_sub = provider(subject.speaker_id, utt_id, subject.utterances[utt_id])
            z_ref = provider(reference.speaker_id, utt_id, ref_path)
        except NoSpeechError as exc:
            log.warning("skipping %s/%s: %s", subject.speaker_id, utt_id, exc)
            skipped.append(utt_id)
            continue
        pair, _ = align(z_ref, z_sub, band=band)
        phi = diff_matrix(pair, utterance_id=utt_id)
        stats.append(UtteranceStat(utt_id, float(np.sum(phi.values)),
                                   phi.values.size))
    return stats, skipped


def index_from_stats(
    stats: list[UtteranceStat], speaker_id: str, mode: str = "grand-mean"
) -> IntelligibilityIndex:
    if not stats:
        raise ValidationError(f"no shared utterances for speaker {speaker_id!r}")
    if mode == "grand-mean":
        value = sum(s.phi_sum for s in stats) / sum(s.n_elements for s in stats)
    elif mode == "per-utterance-mean":
        value = float(np.mean([s.phi_sum / s.n_elements for s in stats]))
    else:
        raise ValidationError(f"unknown index mode {mode!r}")
    return IntelligibilityIndex(value, len(stats), speaker_id)


def score_speaker(
    subject: SpeakerRecord,
    refpair: ReferencePair,
    provider,
    manifest: list[SpeakerRecord],
    mode: str = "grand-mean",
    band: int | None = None,
) -> SpeakerResult:
    """Score one speaker against its gender-matched reference."""
    if subject.speaker_id in refpair.members:
        raise ValidationError(
            f"subject {subject.speaker_id!r} is a reference speaker"
        )
    reference = _find_reference(manifest, refpair, subject.gender)
    stats, skipped = utterance_diff_stats(subject, reference, provider, band=band)
    return SpeakerResult(index_from_stats(stats, subject.speaker_id, mode),
                         stats, skipped)


def _find_reference(
    manifest: list[SpeakerRecord], refpair: ReferencePair, gender: str
) -> SpeakerRecord:
    ref_id = refpair.member_for(gender)
    for rec in manifest:
        if rec.speaker_id == ref_id:
            if rec.group != "control":
                raise ValidationError(f"reference {ref_id!r} is not a control")
            if rec.gender != gender:
                raise ValidationError(
                    f"reference {ref_id!r} has gender {rec.gender}, needed {gender}"
                )
            return rec
    raise ValidationError(f"reference speaker {ref_id!r} not in manifest")


def _correlate_or_none(x, y, notes, label):
    try:
        return correlate(x, y)
    except ValidationError as exc:
        notes.append(f"correlation {label} unavailable: {exc}")
        return None


def _gather_results(
    manifest: list[SpeakerRecord],
    refpair: ReferencePair,
    provider,
    mode: str,
    band: int | None,
    threads: int,
) -> tuple[dict[str, SpeakerResult], list, list]:
    subjects = [r for r in manifest if r.speaker_id not in refpair.members]
    results: dict[str, SpeakerResult] = {}
    failures: list = []
    skipped: list = []

    def run(rec: SpeakerRecord):
        try:
            return score_speaker(rec, refpair, provider, manifest,
                                 mode=mode, band=band), None
        except Exception as exc:
            return None, exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(zip((r.speaker_id for r in subjects),
                                pool.map(run, subjects)))
    else:
        outcomes = [(rec.speaker_id, run(rec)) for rec in subjects]

    for sid, (res, err) in outcomes:
        if err is not None:
            log.warning("speaker %s failed: %s", sid, err)
            failures.append({"speaker_id": sid, "error": str(err)})
            continue
        results[sid] = res
        for utt in res.skipped:
            skipped.append({"speaker_id": sid, "utterance_id": utt,
                            "reason": "missing or voiceless parallel utterance"})
    return results, failures, skipped


def run_evaluation(
    manifest: list[SpeakerRecord],
    refpair: ReferencePair,
    provider,
    mode: str = "grand-mean",
    band: int | None = None,
    threads: int = 1,
    config: dict | None = None,
) -> EvaluationReport:
    """Score every non-reference speaker and correlate the indices with the
    subjective intelligibility scores, over pathological speakers ("-pat")
    and over all speakers ("-all", controls default to 100%).
    """
    by_id = {r.speaker_id: r for r in manifest}
    results, failures, skipped = _gather_results(
        manifest, refpair, provider, mode, band, threads
    )
    notes: list[str] = []
    per_speaker: dict = {}
    scatter: list = []
    xs_all, ys_all, xs_pat, ys_pat = [], [], [], []
    for sid in sorted(results):
        rec, res = by_id[sid], results[sid]
        subj = rec.subjective
        per_speaker[sid] = {
            "index": res.index.value,
            "n_utterances": res.index.n_utterances,
            "group": rec.group,
            "gender": rec.gender,
            "subjective": subj,
        }
        scatter.append({"speaker_id": sid, "group": rec.group,
                        "subjective": subj, "index": res.index.value})
        if subj is not None:
            xs_all.append(subj)
            ys_all.append(res.index.value)
            if rec.group == "pathological":
                xs_pat.append(subj)
                ys_pat.append(res.index.value)
    corr_all = _correlate_or_none(xs_all, ys_all, notes, "-all")
    corr_pat = _correlate_or_none(xs_pat, ys_pat, notes, "-pat")
    notes.append(
        "control speakers without a manifest score are assigned "
        f"{CONTROL_DEFAULT_INTELLIGIBILITY}% subjective intelligibility"
    )
    cfg = dict(config or {})
    cfg.setdefault("index_mode", mode)
    cfg.setdefault("reference_pair", list(refpair.members))
    return EvaluationReport(per_speaker, corr_all, corr_pat, scatter,
                            skipped, failures, cfg, notes)


def reference_pair_sweep(
    manifest: list[SpeakerRecord],
    pairs: list[ReferencePair],
    provider,
    **kwargs,
) -> dict:
    """Evaluate each reference pair and summarize the spread of -all
    correlations across pairs (mean and standard deviation).
    """
    if not pairs:
        raise ValidationError("no reference pairs given")
    reports = [run_evaluation(manifest, p, provider, **kwargs) for p in pairs]
    rs = [r.correlation_all.pearson_r for r in reports if r.correlation_all]
    rss = [r.correlation_all.spearman_r for r in reports if r.correlation_all]
    summary = {
        "n_pairs": len(pairs),
        "pearson_r_mean": float(np.mean(rs)) if rs else None,
        "pearson_r_std": float(np.std(rs)) if rs else None,
        "spearman_r_mean": float(np.mean(rss)) if rss else None,
        "spearman_r_std": float(np.std(rss)) if rss else None,
    }
    return {"per_pair": [r.as_dict() for r in reports], "summary": summary}


def subsample_experiment(
    manifest: list[SpeakerRecord],
    refpair: ReferencePair,
    provider,
    n_utterances: int = 20,
    iterations: int = 1000,
    seed: int = 0,
    mode: str = "grand-mean",
    band: int | None = None,
    threads: int = 1,
) -> dict:
    """Repeatedly score speakers on random utterance subsets.

    Per iteration, each subject's utterances are subsampled uniformly
    without replacement (independently across subjects) and the
    correlations are recomputed from the cached per-utterance totals.
    The RNG is counter-based (numpy Philox keyed by (seed, iteration)),
    so results are bit-identical for a fixed seed regardless of thread
    count or execution order.
    """
    by_id = {r.speaker_id: r for r in manifest}
    results, failures, _ = _gather_results(
        manifest, refpair, provider, mode, band, threads
    )
    if failures:
        raise ValidationError(f"speaker scoring failed: {failures}")
    sids = sorted(results)
    for sid in sids:
        if len(results[sid].stats) < n_utterances:
            raise ValidationError(
                f"speaker {sid!r} has only {len(results[sid].stats)} usable "
                f"utterances, need {n_utterances}"
            )
    subjective = np.array([by_id[sid].subjective for sid in sids], dtype=np.float64)
    pat_mask = np.array([by_id[sid].group == "pathological" for sid in sids])

    def one_iteration(it: int):
        rng = np.random.Generator(np.random.Philox(key=[seed, it]))
        idx_vals = []
        for sid in sids:
            stats = results[sid].stats
            pick = np.sort(rng.choice(len(stats), size=n_utterances,
                                      replace=False))
            chosen = [stats[i] for i in pick]
            idx_vals.append(index_from_stats(chosen, sid, mode).value)
        idx_vals = np.array(idx_vals)
        r, p = _safe_corr(subjective, idx_vals)
        return r, p, *_safe_spearman(subjective, idx_vals)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one_iteration, range(iterations)))
    else:
        rows = [one_iteration(it) for it in range(iterations)]
    rs = np.array([row[0] for row in rows])
    ps = np.array([row[1] for row in rows])
    rss = np.array([row[2] for row in rows])
    pss = np.array([row[3] for row in rows])
    return {
        "n_utterances": n_utterances,
        "iterations": iterations,
        "seed": seed,
        "mean_r": float(rs.mean()),
        "std_r": float(rs.std()),
        "mean_rs": float(rss.mean()),
        "std_rs": float(rss.std()),
        "worst_p": float(max(ps.max(), pss.max())),
        "worst_p_pearson": float(ps.max()),
        "worst_p_spearman": float(pss.max()),
    }


def _safe_corr(x, y):
    from .stats import pearson

    try:
        return pearson(x, y)
    except ValidationError:
        return float("nan"), 1.0


def _safe_spearman(x, y):
    from .stats import spearman

    try:
        return spearman(x, y)
    except ValidationError:
        return float("nan"), 1.0
